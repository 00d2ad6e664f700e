// expath command-line front end. Talks to the library only through the C API.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "expath/expath.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
  expath_status status;
  std::string message;
};

// Owns a C string returned by the library.
struct CString {
  char* p = nullptr;
  ~CString() { expath_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

void check(expath_status s, const std::string& context) {
  if (s != EXPATH_OK) throw Failure{s, context + ": " + expath_last_error()};
}

struct Graph {
  expath_graph* g = nullptr;
  explicit Graph(const std::string& dir) { check(expath_graph_load(dir.c_str(), &g), "loading " + dir); }
  ~Graph() { expath_graph_free(g); }
};

struct Model {
  expath_model* m = nullptr;
  ~Model() { expath_model_free(m); }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{EXPATH_ERR_IO, "cannot open " + path};
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Failure{EXPATH_ERR_PARSE, path + ": " + e.what()};
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Failure{EXPATH_ERR_IO, "cannot write " + path.string()};
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '+') c = '_';
  }
  return s;
}

// Layered settings: config file < environment < flags.
struct Settings {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out = "out";
  std::string data;
  json layered = json::object();

  void load() {
    if (!config_path.empty()) {
      layered = read_json(config_path);
      if (!layered.is_object()) throw Failure{EXPATH_ERR_INVALID_ARGUMENT, "config file must hold a JSON object"};
    }
    if (const char* env = std::getenv("EXPATH_DATA"); env && *env && !layered.contains("data")) {
      // EXPATH_DATA is the data root; relative --data names resolve under it.
      layered["data_root"] = env;
    }
    if (const char* env = std::getenv("EXPATH_SEED"); env && *env) layered["seed"] = std::stoull(env);
    if (const char* env = std::getenv("EXPATH_JOBS"); env && *env) layered["jobs"] = std::stoul(env);
    if (seed) layered["seed"] = *seed;
    if (jobs) layered["jobs"] = *jobs;
    if (layered.contains("out") && out == "out") out = layered["out"].get<std::string>();
  }

  std::string data_dir() const {
    std::string d = !data.empty() ? data : layered.value("data", std::string());
    const std::string root = layered.value("data_root", std::string());
    if (d.empty()) d = root;
    else if (!root.empty() && fs::path(d).is_relative() && !fs::exists(d)) d = (fs::path(root) / d).string();
    if (d.empty()) throw Failure{EXPATH_ERR_INVALID_ARGUMENT, "no dataset given (use --data or EXPATH_DATA)"};
    return d;
  }

  // Run-config request: layered file/env values plus the given flag overrides.
  json request(const json& flags) const {
    json r = layered;
    r.erase("data_root");
    r.erase("synth");
    r.erase("out");
    for (auto it = flags.begin(); it != flags.end(); ++it) {
      if (it.key() == "model" && r.contains("model")) r["model"].update(it.value());
      else if (it.key() == "thresholds" && r.contains("thresholds")) r["thresholds"].update(it.value());
      else r[it.key()] = it.value();
    }
    return r;
  }
};

void append_log(const Settings& s, const std::string& command, double seconds, int code) {
  std::error_code ec;
  fs::create_directories(s.out, ec);
  std::ofstream log(fs::path(s.out) / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  log << stamp << "\t" << command << "\t" << std::fixed << std::setprecision(3) << seconds << "s\texit=" << code << "\n";
}

// Model flags shared by train and attack.
struct ModelFlags {
  std::string cfg_file;
  std::optional<std::string> family;
  std::optional<std::uint32_t> dim, epochs, neg, batch, mimic_epochs;
  std::optional<double> lr, reg, margin;

  void add(CLI::App* app) {
    app->add_option("--model-cfg", cfg_file, "Model config JSON file")->check(CLI::ExistingFile);
    app->add_option("--family", family, "transe | complex | distmult")
        ->check(CLI::IsMember({"transe", "complex", "distmult"}));
    app->add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Learning rate")->check(CLI::PositiveNumber);
    app->add_option("--neg", neg, "Negatives per positive")->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
    app->add_option("--reg", reg, "L2 regularization weight")->check(CLI::NonNegativeNumber);
    app->add_option("--margin", margin, "Margin (transe)")->check(CLI::PositiveNumber);
    app->add_option("--mimic-epochs", mimic_epochs, "Mimic post-training epochs")->check(CLI::PositiveNumber);
  }

  json to_json(const Settings& s) const {
    json m = s.layered.value("model", json::object());
    if (!cfg_file.empty()) m.update(read_json(cfg_file));
    if (family) m["family"] = *family;
    if (dim) m["dim"] = *dim;
    if (epochs) m["epochs"] = *epochs;
    if (lr) m["lr"] = *lr;
    if (neg) m["neg"] = *neg;
    if (batch) m["batch"] = *batch;
    if (reg) m["reg"] = *reg;
    if (margin) m["margin"] = *margin;
    if (mimic_epochs) m["mimic_epochs"] = *mimic_epochs;
    if (s.layered.contains("seed")) m["seed"] = s.layered["seed"];
    return m;
  }
};

// Explanation flags shared by explain and attack.
struct ExplainFlags {
  std::optional<std::size_t> k;
  std::optional<std::string> policy;
  bool no_cp = false, no_pt = false, greedy = false, exclude_both = false;
  std::optional<double> min_sc, min_hc, rel_eps;
  std::optional<std::size_t> max_len, path_cap;
  std::optional<std::uint64_t> min_supp;

  void add(CLI::App* app) {
    app->add_option("--k", k, "Explanation size")->check(CLI::Range(1, 8));
    app->add_option("--policy", policy, "auto | all | head | tail")
        ->check(CLI::IsMember({"auto", "all", "head", "tail"}));
    app->add_flag("--no-cp", no_cp, "Disable closed-path rules");
    app->add_flag("--no-pt", no_pt, "Disable property-transition rules");
    app->add_flag("--greedy", greedy, "Re-score after each selected fact");
    app->add_option("--min-sc", min_sc, "Minimum standard confidence")->check(CLI::NonNegativeNumber);
    app->add_option("--min-hc", min_hc, "Minimum head coverage")->check(CLI::NonNegativeNumber);
    app->add_option("--min-supp", min_supp, "Confidence smoothing support");
    app->add_option("--rel-eps", rel_eps, "Keep a path only when both relevances exceed this")
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--exclude-both", exclude_both, "Mimics drop both orientations of the relation");
    app->add_option("--max-len", max_len, "Longest grounded path")->check(CLI::Range(1, 3));
    app->add_option("--path-cap", path_cap, "Grounded paths kept per prediction")->check(CLI::PositiveNumber);
  }

  void apply(json& flags) const {
    if (k) flags["k"] = *k;
    if (policy) flags["policy"] = *policy;
    if (no_cp) flags["use_cp"] = false;
    if (no_pt) flags["use_pt"] = false;
    if (greedy) flags["greedy"] = true;
    if (exclude_both) flags["exclude_both"] = true;
    if (rel_eps) flags["rel_eps"] = *rel_eps;
    if (max_len) flags["max_len"] = *max_len;
    if (path_cap) flags["path_cap"] = *path_cap;
    json t = json::object();
    if (min_sc) t["min_sc"] = *min_sc;
    if (min_hc) t["min_hc"] = *min_hc;
    if (min_supp) t["min_supp"] = *min_supp;
    if (!t.empty()) flags["thresholds"] = t;
  }
};

std::vector<std::string> split_fields(const std::string& text) {
  std::vector<std::string> parts;
  if (text.find('\t') != std::string::npos) {
    std::stringstream ss(text);
    std::string p;
    while (std::getline(ss, p, '\t')) parts.push_back(p);
  } else {
    std::istringstream ss(text);
    std::string p;
    while (ss >> p) parts.push_back(p);
  }
  return parts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"expath: rule-based explanations for link prediction and deletion attacks"};
  app.require_subcommand(1);
  // Global options are also accepted after the subcommand name.
  app.fallthrough();
  Settings settings;
  app.add_option("--config", settings.config_path, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  app.add_option("--seed", settings.seed, "Master random seed");
  app.add_option("--jobs", settings.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  app.add_option("--out", settings.out, "Output directory")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted-rule dataset into --out");
  std::string spec_file;
  std::optional<std::uint32_t> s_entities, s_relations, s_fan_in;
  std::optional<double> s_p, s_density, s_coverage;
  synth->add_option("--spec", spec_file, "Synthetic spec JSON file")->check(CLI::ExistingFile);
  synth->add_option("--entities", s_entities, "Entity count")->check(CLI::Range(2u, 100000000u));
  synth->add_option("--relations", s_relations, "Relation count")->check(CLI::PositiveNumber);
  synth->add_option("--p", s_p, "Probability of the default planted rule")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--density", s_density, "Background facts per entity")->check(CLI::NonNegativeNumber);
  synth->add_option("--fan-in", s_fan_in, "Sources per intermediate")->check(CLI::PositiveNumber);
  synth->add_option("--coverage", s_coverage, "Share of entities in planted trees")->check(CLI::Range(0.0, 1.0));

  // train
  auto* train = app.add_subcommand("train", "Train an embedding model; writes <out>/model.* and metrics.json");
  ModelFlags train_model;
  train->add_option("--data", settings.data, "Dataset directory");
  train_model.add(train);

  // rules
  auto* rules = app.add_subcommand("rules", "Evaluate rule strings on the train split");
  std::vector<std::string> rule_texts;
  std::string rules_file;
  ExplainFlags rules_flags;
  rules->add_option("--data", settings.data, "Dataset directory");
  rules->add_option("--rule", rule_texts, "Rule, e.g. \"r0 <- r1, r2'\" (repeatable)");
  rules->add_option("--rules-file", rules_file, "File with one rule per line")->check(CLI::ExistingFile);
  rules->add_option("--min-sc", rules_flags.min_sc, "Minimum standard confidence");
  rules->add_option("--min-hc", rules_flags.min_hc, "Minimum head coverage");
  rules->add_option("--min-supp", rules_flags.min_supp, "Confidence smoothing support");

  // explain
  auto* explain = app.add_subcommand("explain", "Explain test predictions with a trained model");
  std::string model_prefix;
  std::vector<std::string> predictions;
  std::optional<std::size_t> explain_targets;
  bool want_dot = false;
  ExplainFlags explain_flags;
  explain->add_option("--data", settings.data, "Dataset directory");
  explain->add_option("--model", model_prefix, "Checkpoint prefix (default <out>/model)");
  explain->add_option("--prediction", predictions, "Test fact \"h r t\" (repeatable)");
  explain->add_option("--targets", explain_targets, "Sample N test facts with RR > 0.5")->check(CLI::PositiveNumber);
  explain->add_flag("--dot", want_dot, "Also write Graphviz files");
  explain_flags.add(explain);

  // attack
  auto* attack = app.add_subcommand("attack", "Deletion attack: select targets, explain, remove, retrain");
  ModelFlags attack_model;
  ExplainFlags attack_flags;
  std::optional<std::size_t> attack_targets, runs;
  std::optional<std::string> method, fallback;
  bool per_target = false;
  attack->add_option("--data", settings.data, "Dataset directory");
  attack_model.add(attack);
  attack_flags.add(attack);
  attack->add_option("--targets", attack_targets, "Number of targets")->check(CLI::PositiveNumber);
  attack->add_option("--method", method, "expath | sparse | random | import:<path>");
  attack->add_option("--fallback", fallback, "Baseline when eXpath finds nothing: none | sparse | random")
      ->check(CLI::IsMember({"none", "sparse", "random"}));
  attack->add_option("--runs", runs, "Repeat with seeds seed..seed+R-1")->check(CLI::PositiveNumber);
  attack->add_flag("--per-target", per_target, "Retrain once per target instead of once per batch");

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Fuse two attack reports (per-target minimum RR)");
  std::vector<std::string> fuse_files;
  fuse->add_option("reports", fuse_files, "Two report files")->required()->expected(2)->check(CLI::ExistingFile);

  // report
  auto* report = app.add_subcommand("report", "Summarize attack reports as a table");
  std::vector<std::string> report_files;
  report->add_option("reports", report_files, "Report files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  std::string command = app.get_subcommands().front()->get_name();
  int code = kExitOk;
  try {
    settings.load();
    const fs::path out(settings.out);

    if (*synth) {
      json spec = settings.layered.value("synth", json::object());
      if (!spec_file.empty()) spec.update(read_json(spec_file));
      if (settings.layered.contains("seed")) spec["seed"] = settings.layered["seed"];
      if (s_entities) spec["entities"] = *s_entities;
      if (s_relations) spec["relations"] = *s_relations;
      if (s_density) spec["density"] = *s_density;
      if (s_fan_in) spec["fan_in"] = *s_fan_in;
      if (s_coverage) spec["coverage"] = *s_coverage;
      if (s_p) spec["rules"] = json::array({{{"head", "r0"}, {"body", {"r1", "r2"}}, {"p", *s_p}}});
      CString result;
      check(expath_synth(spec.dump().c_str(), out.string().c_str(), &result.p), "synth");
      std::cout << result.str();
    } else if (*train) {
      Graph g(settings.data_dir());
      const json mc = train_model.to_json(settings);
      Model m;
      check(expath_model_train(g.g, mc.dump().c_str(), &m.m), "train");
      fs::create_directories(out);
      check(expath_model_save(m.m, (out / "model").string().c_str()), "save");
      CString metrics;
      check(expath_model_evaluate(m.m, g.g, &metrics.p), "evaluate");
      write_file(out / "metrics.json", metrics.str());
      std::cout << metrics.str();
    } else if (*rules) {
      Graph g(settings.data_dir());
      std::vector<std::string> texts = rule_texts;
      if (!rules_file.empty()) {
        std::ifstream in(rules_file);
        for (std::string line; std::getline(in, line);) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty() && line[0] != '#') texts.push_back(line);
        }
      }
      if (texts.empty()) throw Failure{EXPATH_ERR_INVALID_ARGUMENT, "no rules given (use --rule or --rules-file)"};
      json flags = json::object();
      rules_flags.apply(flags);
      json req = settings.request(flags);
      req["rules"] = texts;
      CString result;
      check(expath_rules_evaluate(g.g, req.dump().c_str(), &result.p), "rules");
      write_file(out / "rules.json", result.str());
      std::cout << result.str();
    } else if (*explain) {
      Graph g(settings.data_dir());
      Model m;
      const std::string prefix = model_prefix.empty() ? (out / "model").string() : model_prefix;
      check(expath_model_load(prefix.c_str(), &m.m), "loading checkpoint " + prefix);
      json flags = json::object();
      explain_flags.apply(flags);
      if (explain_targets) flags["targets"] = *explain_targets;
      if (!predictions.empty()) {
        json list = json::array();
        for (const auto& p : predictions) {
          const auto f = split_fields(p);
          if (f.size() != 3)
            throw Failure{EXPATH_ERR_INVALID_ARGUMENT, "--prediction needs three fields \"h r t\": " + p};
          list.push_back({{"h", f[0]}, {"r", f[1]}, {"t", f[2]}});
        }
        flags["predictions"] = list;
      }
      if (want_dot) flags["dot"] = true;
      json req = settings.request(flags);
      CString result;
      check(expath_explain(g.g, m.m, req.dump().c_str(), &result.p), "explain");
      json doc = json::parse(result.str());
      if (doc.contains("dot")) {
        const auto& dots = doc["dot"];
        for (std::size_t i = 0; i < dots.size(); ++i)
          write_file(out / ("explain_" + std::to_string(i) + ".dot"), dots[i].get<std::string>());
        doc.erase("dot");
      }
      const std::string text = doc.dump(2) + "\n";
      write_file(out / "explanations.json", text);
      std::cout << text;
    } else if (*attack) {
      Graph g(settings.data_dir());
      json flags = json::object();
      flags["model"] = attack_model.to_json(settings);
      attack_flags.apply(flags);
      if (attack_targets) flags["targets"] = *attack_targets;
      if (method) flags["method"] = *method;
      if (fallback) flags["fallback"] = *fallback;
      if (runs) flags["runs"] = *runs;
      if (per_target) flags["per_target"] = true;
      json req = settings.request(flags);
      CString result;
      check(expath_attack(g.g, req.dump().c_str(), &result.p), "attack");
      const json doc = json::parse(result.str());
      const std::string name = "report-" + sanitize(doc.value("method", std::string("attack"))) + "-k" +
                               std::to_string(doc.value("k", std::size_t{0})) + ".json";
      write_file(out / name, result.str());
      std::cerr << "wrote " << (out / name).string() << "\n";
      std::cout << result.str();
    } else if (*fuse) {
      const std::string x = read_json(fuse_files[0]).dump();
      const std::string y = read_json(fuse_files[1]).dump();
      CString result;
      check(expath_fuse(x.c_str(), y.c_str(), &result.p), "fuse");
      const json doc = json::parse(result.str());
      const std::string name = "report-" + sanitize(doc.value("method", std::string("fused"))) + "-k" +
                               std::to_string(doc.value("k", std::size_t{0})) + ".json";
      write_file(out / name, result.str());
      std::cout << result.str();
    } else if (*report) {
      json docs = json::array();
      for (const auto& f : report_files) docs.push_back(read_json(f));
      CString summary;
      CString table;
      check(expath_report(docs.dump().c_str(), &summary.p, &table.p), "report");
      write_file(out / "summary.json", summary.str());
      std::cout << table.str();
    }
  } catch (const Failure& f) {
    std::cerr << "expath " << command << ": " << f.message << "\n";
    code = f.status == EXPATH_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "expath " << command << ": " << e.what() << "\n";
    code = kExitRuntime;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  try {
    append_log(settings, command, secs, code);
  } catch (...) {
  }
  return code;
}
