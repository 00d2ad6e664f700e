#include "expath/kge.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "expath/random.hpp"
#include "expath/serialize.hpp"

namespace expath {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host order and must be little-endian");

using Vec = std::span<const float>;
using MutVec = std::span<double>;

// Score and gradient kernels. Gradients accumulate coef * d(score)/d(x).
double score_translational(Vec h, Vec r, Vec t) {
  double sq = 0.0;
  for (std::size_t d = 0; d < h.size(); ++d) {
    double x = double{h[d]} + r[d] - t[d];
    sq += x * x;
  }
  return -std::sqrt(sq);
}

void grad_translational(Vec h, Vec r, Vec t, double coef, MutVec gh, MutVec gr, MutVec gt) {
  double sq = 0.0;
  for (std::size_t d = 0; d < h.size(); ++d) {
    double x = double{h[d]} + r[d] - t[d];
    sq += x * x;
  }
  double norm = std::sqrt(sq);
  if (norm == 0.0) return;
  for (std::size_t d = 0; d < h.size(); ++d) {
    double g = -coef * (double{h[d]} + r[d] - t[d]) / norm;
    if (!gh.empty()) gh[d] += g;
    if (!gr.empty()) gr[d] += g;
    if (!gt.empty()) gt[d] -= g;
  }
}

// First half real parts, second half imaginary parts.
double score_complex(Vec h, Vec r, Vec t) {
  const std::size_t k = h.size() / 2;
  double s = 0.0;
  for (std::size_t d = 0; d < k; ++d) {
    double hr = h[d], hi = h[d + k], rr = r[d], ri = r[d + k], tr = t[d], ti = t[d + k];
    s += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
  }
  return s;
}

void grad_complex(Vec h, Vec r, Vec t, double coef, MutVec gh, MutVec gr, MutVec gt) {
  const std::size_t k = h.size() / 2;
  for (std::size_t d = 0; d < k; ++d) {
    double hr = h[d], hi = h[d + k], rr = r[d], ri = r[d + k], tr = t[d], ti = t[d + k];
    if (!gh.empty()) {
      gh[d] += coef * (rr * tr + ri * ti);
      gh[d + k] += coef * (rr * ti - ri * tr);
    }
    if (!gr.empty()) {
      gr[d] += coef * (hr * tr + hi * ti);
      gr[d + k] += coef * (hr * ti - hi * tr);
    }
    if (!gt.empty()) {
      gt[d] += coef * (hr * rr - hi * ri);
      gt[d + k] += coef * (hi * rr + hr * ri);
    }
  }
}

double score_real(Vec h, Vec r, Vec t) {
  double s = 0.0;
  for (std::size_t d = 0; d < h.size(); ++d) s += double{h[d]} * r[d] * t[d];
  return s;
}

void grad_real(Vec h, Vec r, Vec t, double coef, MutVec gh, MutVec gr, MutVec gt) {
  for (std::size_t d = 0; d < h.size(); ++d) {
    if (!gh.empty()) gh[d] += coef * double{r[d]} * t[d];
    if (!gr.empty()) gr[d] += coef * double{h[d]} * t[d];
    if (!gt.empty()) gt[d] += coef * double{h[d]} * r[d];
  }
}

double family_score(ModelFamily f, Vec h, Vec r, Vec t) {
  switch (f) {
    case ModelFamily::translational: return score_translational(h, r, t);
    case ModelFamily::complex_bilinear: return score_complex(h, r, t);
    case ModelFamily::real_bilinear: return score_real(h, r, t);
  }
  return 0.0;
}

void family_grad(ModelFamily f, Vec h, Vec r, Vec t, double coef, MutVec gh, MutVec gr, MutVec gt) {
  switch (f) {
    case ModelFamily::translational: grad_translational(h, r, t, coef, gh, gr, gt); break;
    case ModelFamily::complex_bilinear: grad_complex(h, r, t, coef, gh, gr, gt); break;
    case ModelFamily::real_bilinear: grad_real(h, r, t, coef, gh, gr, gt); break;
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void clamp_to_unit_ball(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += double{x} * x;
  if (sq > 1.0) {
    double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
  }
}

// Dense gradient rows for the parameters touched by one batch. Rows are
// applied in ascending index order so the update is independent of hashing.
class GradBuffer {
 public:
  GradBuffer(std::size_t rows, std::size_t dim)
      : dim_(dim), values_(rows * dim, 0.0), touched_flag_(rows, 0) {}

  MutVec row(std::size_t i) {
    if (!touched_flag_[i]) {
      touched_flag_[i] = 1;
      touched_.push_back(i);
    }
    return {values_.data() + i * dim_, dim_};
  }

  template <class Apply>
  void flush(Apply&& apply) {
    std::sort(touched_.begin(), touched_.end());
    for (auto i : touched_) {
      MutVec g{values_.data() + i * dim_, dim_};
      apply(i, g);
      std::fill(g.begin(), g.end(), 0.0);
      touched_flag_[i] = 0;
    }
    touched_.clear();
  }

 private:
  std::size_t dim_;
  std::vector<double> values_;
  std::vector<char> touched_flag_;
  std::vector<std::size_t> touched_;
};

void adagrad_step(std::span<float> v, double* acc, MutVec g, double lr) {
  for (std::size_t d = 0; d < v.size(); ++d) {
    acc[d] += g[d] * g[d];
    if (acc[d] > 0.0) v[d] = static_cast<float>(v[d] - lr * g[d] / std::sqrt(acc[d]));
  }
}

}  // namespace

std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::translational: return "transe";
    case ModelFamily::complex_bilinear: return "complex";
    case ModelFamily::real_bilinear: return "distmult";
  }
  return "?";
}

ModelFamily parse_family(std::string_view name) {
  if (name == "transe") return ModelFamily::translational;
  if (name == "complex") return ModelFamily::complex_bilinear;
  if (name == "distmult") return ModelFamily::real_bilinear;
  throw InvalidArgument("unknown model family '" + std::string(name) +
                        "' (expected transe, complex or distmult)");
}

void ModelConfig::validate() const {
  if (dimension == 0) throw InvalidArgument("dimension must be positive");
  if (family == ModelFamily::complex_bilinear && dimension % 2 != 0)
    throw InvalidArgument("complex dimension must be even");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (negatives == 0) throw InvalidArgument("negatives per positive must be positive");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(regularization >= 0.0)) throw InvalidArgument("regularization must be non-negative");
  if (family == ModelFamily::translational && !(margin > 0.0))
    throw InvalidArgument("margin must be positive");
  if (!(mimic_lr_scale > 0.0)) throw InvalidArgument("mimic learning-rate scale must be positive");
}

EmbeddingModel::EmbeddingModel(ModelConfig config, std::uint32_t num_entities,
                               std::uint32_t num_relations)
    : config_(config),
      num_entities_(num_entities),
      num_relations_(num_relations),
      entities_(std::size_t{num_entities} * config.dimension, 0.0f),
      relations_(std::size_t{num_relations} * config.dimension, 0.0f) {}

EmbeddingModel EmbeddingModel::initialize(const ModelConfig& config, std::uint32_t num_entities,
                                          std::uint32_t num_relations) {
  config.validate();
  EmbeddingModel m(config, num_entities, num_relations);
  Rng rng(config.seed);
  for (auto& x : m.entities_) x = static_cast<float>(rng.uniform(-0.1, 0.1));
  for (auto& x : m.relations_) x = static_cast<float>(rng.uniform(-0.1, 0.1));
  return m;
}

std::span<const float> EmbeddingModel::entity(EntityId e) const {
  if (e >= num_entities_) throw LookupError("entity id out of range for model");
  return {entities_.data() + std::size_t{e} * dim(), dim()};
}

std::span<const float> EmbeddingModel::relation(RelationId r) const {
  if (r >= num_relations_) throw LookupError("relation id out of range for model");
  return {relations_.data() + std::size_t{r} * dim(), dim()};
}

std::span<float> EmbeddingModel::entity(EntityId e) {
  if (e >= num_entities_) throw LookupError("entity id out of range for model");
  return {entities_.data() + std::size_t{e} * dim(), dim()};
}

std::span<float> EmbeddingModel::relation(RelationId r) {
  if (r >= num_relations_) throw LookupError("relation id out of range for model");
  return {relations_.data() + std::size_t{r} * dim(), dim()};
}

double EmbeddingModel::score(EntityId h, RelationId r, EntityId t) const {
  return family_score(config_.family, entity(h), relation(r), entity(t));
}

double EmbeddingModel::score(std::span<const float> h, RelationId r,
                             std::span<const float> t) const {
  return family_score(config_.family, h, relation(r), t);
}

void EmbeddingModel::score_tails(EntityId h, RelationId r, std::vector<double>& out) const {
  out.resize(num_entities_);
  auto hv = entity(h);
  auto rv = relation(r);
  const std::size_t n = dim();
  if (config_.family == ModelFamily::translational) {
    for (EntityId e = 0; e < num_entities_; ++e) out[e] = score_translational(hv, rv, entity(e));
    return;
  }
  // Bilinear scores are linear in the tail: s = <q, t>.
  std::vector<double> q(n);
  if (config_.family == ModelFamily::complex_bilinear) {
    const std::size_t k = n / 2;
    for (std::size_t d = 0; d < k; ++d) {
      double hr = hv[d], hi = hv[d + k], rr = rv[d], ri = rv[d + k];
      q[d] = hr * rr - hi * ri;
      q[d + k] = hi * rr + hr * ri;
    }
  } else {
    for (std::size_t d = 0; d < n; ++d) q[d] = double{hv[d]} * rv[d];
  }
  for (EntityId e = 0; e < num_entities_; ++e) {
    auto tv = entity(e);
    double s = 0.0;
    for (std::size_t d = 0; d < n; ++d) s += q[d] * tv[d];
    out[e] = s;
  }
}

void EmbeddingModel::score_heads(RelationId r, EntityId t, std::vector<double>& out) const {
  out.resize(num_entities_);
  auto tv = entity(t);
  auto rv = relation(r);
  const std::size_t n = dim();
  if (config_.family == ModelFamily::translational) {
    for (EntityId e = 0; e < num_entities_; ++e) out[e] = score_translational(entity(e), rv, tv);
    return;
  }
  std::vector<double> q(n);
  if (config_.family == ModelFamily::complex_bilinear) {
    const std::size_t k = n / 2;
    for (std::size_t d = 0; d < k; ++d) {
      double rr = rv[d], ri = rv[d + k], tr = tv[d], ti = tv[d + k];
      q[d] = rr * tr + ri * ti;
      q[d + k] = rr * ti - ri * tr;
    }
  } else {
    for (std::size_t d = 0; d < n; ++d) q[d] = double{rv[d]} * tv[d];
  }
  for (EntityId e = 0; e < num_entities_; ++e) {
    auto hv = entity(e);
    double s = 0.0;
    for (std::size_t d = 0; d < n; ++d) s += q[d] * hv[d];
    out[e] = s;
  }
}

bool EmbeddingModel::all_finite() const {
  auto finite = [](float x) { return std::isfinite(x); };
  return std::all_of(entities_.begin(), entities_.end(), finite) &&
         std::all_of(relations_.begin(), relations_.end(), finite);
}

void EmbeddingModel::save(const std::filesystem::path& prefix) const {
  nlohmann::json meta;
  meta["format"] = "expath-checkpoint";
  meta["version"] = 1;
  meta["family"] = family_name(config_.family);
  meta["dimension"] = config_.dimension;
  meta["seed"] = config_.seed;
  meta["num_entities"] = num_entities_;
  meta["num_relations"] = num_relations_;
  meta["config"] = config_;

  auto meta_path = prefix;
  meta_path += ".meta.json";
  auto bin_path = prefix;
  bin_path += ".emb.bin";
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

  std::ofstream m(meta_path, std::ios::binary);
  if (!m) throw IoError("cannot write " + meta_path.string());
  m << meta.dump(2) << '\n';

  std::ofstream b(bin_path, std::ios::binary);
  if (!b) throw IoError("cannot write " + bin_path.string());
  b.write(reinterpret_cast<const char*>(entities_.data()),
          static_cast<std::streamsize>(entities_.size() * sizeof(float)));
  b.write(reinterpret_cast<const char*>(relations_.data()),
          static_cast<std::streamsize>(relations_.size() * sizeof(float)));
  if (!b) throw IoError("short write to " + bin_path.string());
}

EmbeddingModel EmbeddingModel::load(const std::filesystem::path& prefix) {
  auto meta_path = prefix;
  meta_path += ".meta.json";
  auto bin_path = prefix;
  bin_path += ".emb.bin";
  std::ifstream m(meta_path, std::ios::binary);
  if (!m) throw IoError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "expath-checkpoint")
    throw ParseError(meta_path.string() + ": not an expath checkpoint");
  ModelConfig config = meta.at("config").get<ModelConfig>();
  EmbeddingModel model(config, meta.at("num_entities").get<std::uint32_t>(),
                       meta.at("num_relations").get<std::uint32_t>());

  std::ifstream b(bin_path, std::ios::binary);
  if (!b) throw IoError("cannot open " + bin_path.string());
  b.read(reinterpret_cast<char*>(model.entities_.data()),
         static_cast<std::streamsize>(model.entities_.size() * sizeof(float)));
  b.read(reinterpret_cast<char*>(model.relations_.data()),
         static_cast<std::streamsize>(model.relations_.size() * sizeof(float)));
  if (!b) throw IoError(bin_path.string() + ": payload shorter than metadata declares");
  b.peek();
  if (!b.eof()) throw IoError(bin_path.string() + ": payload longer than metadata declares");
  return model;
}

double plausibility(double score) { return sigmoid(score); }

double plausibility(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t) {
  return plausibility(model.score(h, r, t));
}

EmbeddingModel train(const KnowledgeGraph& kg, const ModelConfig& config) {
  config.validate();
  const auto& facts = kg.facts(Split::train);
  if (facts.empty()) throw InvalidArgument("cannot train on an empty train split");

  EmbeddingModel model =
      EmbeddingModel::initialize(config, kg.num_entities(), kg.num_relations());
  const std::size_t dim = config.dimension;
  const std::uint32_t n_ent = kg.num_entities();
  const bool translational = config.family == ModelFamily::translational;
  const double lr = config.learning_rate;
  const double reg = config.regularization;

  // Sample stream separate from the initialization stream.
  Rng rng(mix_seed(config.seed, 0x7261696eULL));
  std::vector<std::uint32_t> order(facts.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  GradBuffer ent_grad(n_ent, dim);
  GradBuffer rel_grad(kg.num_relations(), dim);
  // Batch gradients are summed, so rows that occur in many examples (relations,
  // hubs) need per-coordinate step scaling.
  std::vector<double> ent_acc(static_cast<std::size_t>(n_ent) * dim, 0.0);
  std::vector<double> rel_acc(static_cast<std::size_t>(kg.num_relations()) * dim, 0.0);

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::uint32_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const Fact& f = facts[order[i]];
        const auto hv = model.entity(f.head);
        const auto rv = model.relation(f.relation);
        const auto tv = model.entity(f.tail);
        const double pos = family_score(config.family, hv, rv, tv);

        for (std::uint32_t n = 0; n < config.negatives; ++n) {
          const bool corrupt_head = rng.bernoulli(0.5);
          const auto other = static_cast<EntityId>(rng.below(n_ent));
          const EntityId nh = corrupt_head ? other : f.head;
          const EntityId nt = corrupt_head ? f.tail : other;
          const auto nhv = model.entity(nh);
          const auto ntv = model.entity(nt);
          const double neg = family_score(config.family, nhv, rv, ntv);

          if (translational) {
            if (config.margin - pos + neg <= 0.0) continue;
            family_grad(config.family, hv, rv, tv, -1.0, ent_grad.row(f.head),
                        rel_grad.row(f.relation), ent_grad.row(f.tail));
            family_grad(config.family, nhv, rv, ntv, 1.0, ent_grad.row(nh),
                        rel_grad.row(f.relation), ent_grad.row(nt));
          } else {
            // softplus(-y s) per label; d/ds = -y * sigmoid(-y s).
            const double gneg = sigmoid(neg);
            family_grad(config.family, nhv, rv, ntv, gneg, ent_grad.row(nh),
                        rel_grad.row(f.relation), ent_grad.row(nt));
          }
        }
        if (!translational) {
          const double gpos = -sigmoid(-pos) * config.negatives;
          family_grad(config.family, hv, rv, tv, gpos, ent_grad.row(f.head),
                      rel_grad.row(f.relation), ent_grad.row(f.tail));
          if (reg > 0.0) {
            auto gh = ent_grad.row(f.head);
            auto gr = rel_grad.row(f.relation);
            auto gt = ent_grad.row(f.tail);
            for (std::size_t d = 0; d < dim; ++d) {
              gh[d] += 2.0 * reg * hv[d];
              gr[d] += 2.0 * reg * rv[d];
              gt[d] += 2.0 * reg * tv[d];
            }
          }
        }
      }
      ent_grad.flush([&](std::size_t row, MutVec g) {
        adagrad_step(model.entity(static_cast<EntityId>(row)), ent_acc.data() + row * dim, g, lr);
      });
      rel_grad.flush([&](std::size_t row, MutVec g) {
        adagrad_step(model.relation(static_cast<RelationId>(row)), rel_acc.data() + row * dim, g, lr);
      });
    }
    if (translational) {
      for (EntityId e = 0; e < n_ent; ++e) clamp_to_unit_ball(model.entity(e));
    }
  }
  if (!model.all_finite()) throw Error("training diverged: non-finite embedding values");
  return model;
}

std::uint32_t rank(const EmbeddingModel& model, const KnowledgeGraph& kg, const Fact& f, Side side,
                   bool filtered) {
  std::vector<double> scores;
  std::span<const EntityId> known;
  EntityId target;
  if (side == Side::tail) {
    model.score_tails(f.head, f.relation, scores);
    target = f.tail;
    if (filtered) known = kg.known_tails(f.head, f.relation);
  } else {
    model.score_heads(f.relation, f.tail, scores);
    target = f.head;
    if (filtered) known = kg.known_heads(f.relation, f.tail);
  }
  const double target_score = scores[target];
  std::uint32_t better = 0;
  for (EntityId e = 0; e < scores.size(); ++e) {
    if (e == target || !(scores[e] > target_score)) continue;
    if (filtered && std::binary_search(known.begin(), known.end(), e)) continue;
    ++better;
  }
  return better + 1;
}

RankResult rank_both(const EmbeddingModel& model, const KnowledgeGraph& kg, const Fact& f,
                     bool filtered) {
  return {f, rank(model, kg, f, Side::head, filtered), rank(model, kg, f, Side::tail, filtered)};
}

Evaluation mrr_h1(const EmbeddingModel& model, const KnowledgeGraph& kg, std::span<const Fact> facts,
                  bool filtered) {
  if (facts.empty()) throw InvalidArgument("cannot evaluate an empty fact set");
  Evaluation ev;
  ev.ranks.reserve(facts.size());
  double rr_sum = 0.0;
  double h1_sum = 0.0;
  for (const auto& f : facts) {
    ev.ranks.push_back(rank_both(model, kg, f, filtered));
    rr_sum += ev.ranks.back().reciprocal_rank();
    h1_sum += ev.ranks.back().hits_at_1();
  }
  ev.mrr = rr_sum / static_cast<double>(facts.size());
  ev.hits_at_1 = h1_sum / static_cast<double>(facts.size());
  return ev;
}

std::vector<float> post_train_mimic(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                    EntityId e, const FactSet& excluded, std::uint32_t epochs,
                                    std::uint64_t salt) {
  const auto& config = model.config();
  std::vector<Fact> local;
  for (const auto& edge : kg.neighbors(e)) {
    // Self-loops are indexed twice; keep one copy.
    if (edge.fact.head == edge.fact.tail && edge.relation.inverse) continue;
    if (!excluded.contains(edge.fact)) local.push_back(edge.fact);
  }
  if (local.empty())
    throw DegenerateEntity("entity '" + kg.entities().label(e) +
                           "' has no train facts left after exclusion");

  const auto initial = model.entity(e);
  std::vector<float> mimic(initial.begin(), initial.end());
  const std::size_t dim = mimic.size();
  const double lr = config.learning_rate * config.mimic_lr_scale;
  const bool translational = config.family == ModelFamily::translational;
  const std::uint32_t n_ent = kg.num_entities();
  Rng rng(mix_seed(mix_seed(config.seed, e), salt));
  std::vector<double> grad(dim);

  for (std::uint32_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<Fact>(local));
    for (const auto& f : local) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const bool at_head = f.head == e;
      const bool at_tail = f.tail == e;
      const auto rv = model.relation(f.relation);
      const Vec mv(mimic);
      const Vec hv = at_head ? mv : model.entity(f.head);
      const Vec tv = at_tail ? mv : model.entity(f.tail);
      const MutVec gh = at_head ? MutVec(grad) : MutVec();
      const MutVec gt = at_tail ? MutVec(grad) : MutVec();
      const double pos = family_score(config.family, hv, rv, tv);

      for (std::uint32_t n = 0; n < config.negatives; ++n) {
        // Corrupt the far side so the gradient reaches the mimic.
        const auto other = static_cast<EntityId>(rng.below(n_ent));
        const Vec ov = model.entity(other);
        const Vec nhv = at_head ? mv : ov;
        const Vec ntv = at_head ? ov : mv;
        const MutVec ngh = at_head ? MutVec(grad) : MutVec();
        const MutVec ngt = at_head ? MutVec() : MutVec(grad);
        const double neg = family_score(config.family, nhv, rv, ntv);
        if (translational) {
          if (config.margin - pos + neg <= 0.0) continue;
          family_grad(config.family, hv, rv, tv, -1.0, gh, {}, gt);
          family_grad(config.family, nhv, rv, ntv, 1.0, ngh, {}, ngt);
        } else {
          family_grad(config.family, nhv, rv, ntv, sigmoid(neg), ngh, {}, ngt);
        }
      }
      if (!translational) {
        family_grad(config.family, hv, rv, tv, -sigmoid(-pos) * config.negatives, gh, {}, gt);
        for (std::size_t d = 0; d < dim; ++d) grad[d] += 2.0 * config.regularization * mimic[d];
      }
      for (std::size_t d = 0; d < dim; ++d) mimic[d] = static_cast<float>(mimic[d] - lr * grad[d]);
    }
    if (translational) clamp_to_unit_ball(mimic);
  }
  return mimic;
}

}  // namespace expath
