#include "expath/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "expath/error.hpp"

namespace expath {

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (std::uint64_t{a} << 32) | b;
}

bool edge_less(const Edge& a, const Edge& b) {
  if (a.relation != b.relation) return a.relation < b.relation;
  if (a.other != b.other) return a.other < b.other;
  return a.fact < b.fact;
}

}  // namespace

std::vector<Triple> parse_triples(std::string_view text) {
  std::vector<Triple> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::string_view fields[3];
    std::size_t n = 0;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      if (n == 3) throw ParseError("expected 3 tab-separated fields, found more", line_no);
      fields[n++] = line.substr(start, tab == std::string_view::npos ? tab : tab - start);
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (n != 3)
      throw ParseError("expected 3 tab-separated fields, found " + std::to_string(n), line_no);
    for (std::size_t i = 0; i < 3; ++i) {
      if (fields[i].empty())
        throw ParseError("empty field " + std::to_string(i + 1), line_no);
    }
    out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  return out;
}

std::vector<Triple> read_triples_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_triples(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.what(), e.line());
  }
}

std::uint32_t Dictionary::intern(std::string_view label) {
  if (auto it = ids_.find(label); it != ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  ids_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> Dictionary::find(std::string_view label) const {
  if (auto it = ids_.find(label); it != ids_.end()) return it->second;
  return std::nullopt;
}

std::uint32_t Dictionary::at(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw LookupError("unknown label '" + std::string(label) + "'");
}

const std::string& Dictionary::label(std::uint32_t id) const {
  if (id >= labels_.size()) throw LookupError("id " + std::to_string(id) + " out of range");
  return labels_[id];
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

KnowledgeGraph::KnowledgeGraph()
    : dicts_(std::make_shared<Dictionaries>()),
      train_(std::make_shared<SplitData>()),
      valid_(std::make_shared<SplitData>()),
      test_(std::make_shared<SplitData>()) {
  rebuild_indices();
}

KnowledgeGraph KnowledgeGraph::build(const std::vector<Triple>& train,
                                     const std::vector<Triple>& valid,
                                     const std::vector<Triple>& test, BuildStats* stats) {
  auto dicts = std::make_shared<Dictionaries>();
  auto encode = [&](const std::vector<Triple>& triples, std::size_t& dups) {
    auto data = std::make_shared<SplitData>();
    data->facts.reserve(triples.size());
    for (const auto& t : triples) {
      Fact f;
      f.head = dicts->entities.intern(t.head);
      f.relation = dicts->relations.intern(t.relation);
      f.tail = dicts->entities.intern(t.tail);
      if (data->members.insert(f).second) {
        data->facts.push_back(f);
      } else {
        ++dups;
      }
    }
    return data;
  };
  BuildStats local;
  KnowledgeGraph kg;
  kg.train_ = encode(train, local.duplicates_train);
  kg.valid_ = encode(valid, local.duplicates_valid);
  kg.test_ = encode(test, local.duplicates_test);
  kg.dicts_ = std::move(dicts);
  kg.rebuild_indices();
  if (stats) *stats = local;
  return kg;
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& dir, BuildStats* stats) {
  if (!std::filesystem::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  return build(read_triples_file(dir / "train.txt"), read_triples_file(dir / "valid.txt"),
               read_triples_file(dir / "test.txt"), stats);
}

void KnowledgeGraph::rebuild_indices() {
  const std::uint32_t n_ent = dicts_->entities.size();
  const std::uint32_t n_rel = dicts_->relations.size();
  auto index = std::make_shared<TrainIndex>();

  index->edge_offsets.assign(std::size_t{n_ent} + 1, 0);
  for (const auto& f : train_->facts) {
    ++index->edge_offsets[f.head + 1];
    ++index->edge_offsets[f.tail + 1];
  }
  for (std::uint32_t e = 0; e < n_ent; ++e) index->edge_offsets[e + 1] += index->edge_offsets[e];
  index->edges.resize(index->edge_offsets.back());
  std::vector<std::size_t> fill(index->edge_offsets.begin(), index->edge_offsets.end() - 1);
  for (const auto& f : train_->facts) {
    index->edges[fill[f.head]++] = Edge{forward(f.relation), f.tail, f};
    index->edges[fill[f.tail]++] = Edge{backward(f.relation), f.head, f};
  }
  for (std::uint32_t e = 0; e < n_ent; ++e) {
    std::sort(index->edges.begin() + static_cast<std::ptrdiff_t>(index->edge_offsets[e]),
              index->edges.begin() + static_cast<std::ptrdiff_t>(index->edge_offsets[e + 1]),
              edge_less);
  }

  index->rel_offsets.assign(std::size_t{n_rel} + 1, 0);
  for (const auto& f : train_->facts) ++index->rel_offsets[f.relation + 1];
  for (std::uint32_t r = 0; r < n_rel; ++r) index->rel_offsets[r + 1] += index->rel_offsets[r];
  index->by_relation.resize(train_->facts.size());
  std::vector<std::size_t> rfill(index->rel_offsets.begin(), index->rel_offsets.end() - 1);
  for (const auto& f : train_->facts) index->by_relation[rfill[f.relation]++] = f;
  for (std::uint32_t r = 0; r < n_rel; ++r) {
    std::sort(index->by_relation.begin() + static_cast<std::ptrdiff_t>(index->rel_offsets[r]),
              index->by_relation.begin() + static_cast<std::ptrdiff_t>(index->rel_offsets[r + 1]));
  }
  index_ = std::move(index);

  auto known = std::make_shared<KnownIndex>();
  for (const auto* data : {train_.get(), valid_.get(), test_.get()}) {
    for (const auto& f : data->facts) {
      known->tails[pair_key(f.head, f.relation)].push_back(f.tail);
      known->heads[pair_key(f.relation, f.tail)].push_back(f.head);
    }
  }
  for (auto* m : {&known->tails, &known->heads}) {
    for (auto& [key, v] : *m) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }
  known_ = std::move(known);
}

const KnowledgeGraph::SplitData& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::train: return *train_;
    case Split::valid: return *valid_;
    case Split::test: return *test_;
  }
  throw InvalidArgument("bad split");
}

bool KnowledgeGraph::is_known(const Fact& f) const {
  return train_->members.contains(f) || valid_->members.contains(f) || test_->members.contains(f);
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e >= num_entities()) throw LookupError("unknown entity id " + std::to_string(e));
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e) const {
  check_entity(e);
  const auto& idx = *index_;
  return {idx.edges.data() + idx.edge_offsets[e], idx.edges.data() + idx.edge_offsets[e + 1]};
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e, SignedRelation sr) const {
  auto all = neighbors(e);
  auto lo = std::lower_bound(all.begin(), all.end(), sr,
                             [](const Edge& a, SignedRelation v) { return a.relation < v; });
  auto hi = std::upper_bound(lo, all.end(), sr,
                             [](SignedRelation v, const Edge& a) { return v < a.relation; });
  return {lo, hi};
}

std::span<const Fact> KnowledgeGraph::facts_by_relation(RelationId r) const {
  if (r >= num_relations()) throw LookupError("unknown relation id " + std::to_string(r));
  const auto& idx = *index_;
  return {idx.by_relation.data() + idx.rel_offsets[r],
          idx.by_relation.data() + idx.rel_offsets[r + 1]};
}

std::span<const EntityId> KnowledgeGraph::known_tails(EntityId h, RelationId r) const {
  auto it = known_->tails.find(pair_key(h, r));
  if (it == known_->tails.end()) return {};
  return it->second;
}

std::span<const EntityId> KnowledgeGraph::known_heads(RelationId r, EntityId t) const {
  auto it = known_->heads.find(pair_key(r, t));
  if (it == known_->heads.end()) return {};
  return it->second;
}

SparseBoolMatrix KnowledgeGraph::adjacency(SignedRelation sr) const {
  auto facts = facts_by_relation(sr.relation);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(facts.size());
  for (const auto& f : facts) {
    if (sr.inverse) {
      pairs.emplace_back(f.tail, f.head);
    } else {
      pairs.emplace_back(f.head, f.tail);
    }
  }
  return SparseBoolMatrix::from_pairs(num_entities(), num_entities(), std::move(pairs));
}

KnowledgeGraph KnowledgeGraph::remove_facts(std::span<const Fact> victims) const {
  FactSet doomed;
  std::string missing;
  for (const auto& f : victims) {
    if (!train_->members.contains(f)) {
      if (!missing.empty()) missing += ", ";
      missing += "(" + to_string(f) + ")";
    } else {
      doomed.insert(f);
    }
  }
  if (!missing.empty()) throw LookupError("facts not in train split: " + missing);

  KnowledgeGraph out(*this);
  if (doomed.empty()) return out;
  auto data = std::make_shared<SplitData>();
  data->facts.reserve(train_->facts.size() - doomed.size());
  for (const auto& f : train_->facts) {
    if (!doomed.contains(f)) {
      data->facts.push_back(f);
      data->members.insert(f);
    }
  }
  out.train_ = std::move(data);
  out.rebuild_indices();
  return out;
}

Fact KnowledgeGraph::resolve(const Triple& t) const {
  Fact f;
  f.head = entities().at(t.head);
  f.relation = relations().at(t.relation);
  f.tail = entities().at(t.tail);
  return f;
}

Triple KnowledgeGraph::labels(const Fact& f) const {
  return {entities().label(f.head), relations().label(f.relation), entities().label(f.tail)};
}

std::string KnowledgeGraph::to_string(const Fact& f) const {
  auto t = labels(f);
  return t.head + "\t" + t.relation + "\t" + t.tail;
}

std::string KnowledgeGraph::to_string(SignedRelation sr) const {
  auto s = relations().label(sr.relation);
  if (sr.inverse) s += '\'';
  return s;
}

}  // namespace expath
