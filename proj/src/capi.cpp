#include "expath/expath.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "expath/pipeline.hpp"
#include "expath/serialize.hpp"
#include "expath/synth.hpp"

struct expath_graph {
  expath::KnowledgeGraph kg;
  expath::BuildStats stats;
};

struct expath_model {
  expath::EmbeddingModel model;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class F>
expath_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return EXPATH_OK;
  } catch (const expath::ParseError& e) {
    g_last_error = e.what();
    return EXPATH_ERR_PARSE;
  } catch (const expath::LookupError& e) {
    g_last_error = e.what();
    return EXPATH_ERR_LOOKUP;
  } catch (const expath::IoError& e) {
    g_last_error = e.what();
    return EXPATH_ERR_IO;
  } catch (const expath::InvalidArgument& e) {
    g_last_error = e.what();
    return EXPATH_ERR_INVALID_ARGUMENT;
  } catch (const nlohmann::json::parse_error& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return EXPATH_ERR_PARSE;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("unexpected JSON content: ") + e.what();
    return EXPATH_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EXPATH_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return EXPATH_ERR_RUNTIME;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw expath::InvalidArgument(std::string(what) + " must not be NULL");
}

nlohmann::json parse_json(const char* text, const char* what) {
  require(text, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw expath::ParseError(std::string(what) + ": " + e.what());
  }
}

void emit(char** out, const nlohmann::json& j) {
  require(out, "output pointer");
  *out = dup_string(expath::dump(j));
}

}  // namespace

extern "C" {

const char* expath_version(void) { return "0.1.0"; }

const char* expath_last_error(void) { return g_last_error.c_str(); }

const char* expath_status_name(expath_status status) {
  switch (status) {
    case EXPATH_OK: return "ok";
    case EXPATH_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EXPATH_ERR_PARSE: return "parse error";
    case EXPATH_ERR_LOOKUP: return "lookup error";
    case EXPATH_ERR_IO: return "i/o error";
    case EXPATH_ERR_RUNTIME: return "runtime error";
  }
  return "unknown status";
}

void expath_string_free(char* s) { std::free(s); }

expath_status expath_graph_load(const char* dir, expath_graph** out) {
  return guarded([&] {
    require(dir, "dataset directory");
    require(out, "output pointer");
    auto g = std::make_unique<expath_graph>();
    g->kg = expath::KnowledgeGraph::load(dir, &g->stats);
    *out = g.release();
  });
}

void expath_graph_free(expath_graph* graph) { delete graph; }

expath_status expath_graph_stats(const expath_graph* graph, char** json_out) {
  return guarded([&] {
    require(graph, "graph");
    const auto& kg = graph->kg;
    emit(json_out, {{"entities", kg.num_entities()},
                    {"relations", kg.num_relations()},
                    {"train", kg.facts(expath::Split::train).size()},
                    {"valid", kg.facts(expath::Split::valid).size()},
                    {"test", kg.facts(expath::Split::test).size()},
                    {"duplicates",
                     {{"train", graph->stats.duplicates_train},
                      {"valid", graph->stats.duplicates_valid},
                      {"test", graph->stats.duplicates_test}}}});
  });
}

expath_status expath_model_train(const expath_graph* graph, const char* config_json,
                                 expath_model** out) {
  return guarded([&] {
    require(graph, "graph");
    require(out, "output pointer");
    expath::ModelConfig config;
    expath::from_json(parse_json(config_json, "model config"), config);
    auto m = std::make_unique<expath_model>();
    m->model = expath::train(graph->kg, config);
    *out = m.release();
  });
}

expath_status expath_model_save(const expath_model* model, const char* prefix) {
  return guarded([&] {
    require(model, "model");
    require(prefix, "checkpoint prefix");
    model->model.save(prefix);
  });
}

expath_status expath_model_load(const char* prefix, expath_model** out) {
  return guarded([&] {
    require(prefix, "checkpoint prefix");
    require(out, "output pointer");
    auto m = std::make_unique<expath_model>();
    m->model = expath::EmbeddingModel::load(prefix);
    *out = m.release();
  });
}

void expath_model_free(expath_model* model) { delete model; }

namespace {

void check_compatible(const expath_model* model, const expath_graph* graph) {
  require(model, "model");
  require(graph, "graph");
  if (model->model.num_entities() != graph->kg.num_entities() ||
      model->model.num_relations() != graph->kg.num_relations())
    throw expath::InvalidArgument("checkpoint does not match the dataset (entity or relation count differs)");
}

}  // namespace

expath_status expath_model_evaluate(const expath_model* model, const expath_graph* graph,
                                    char** json_out) {
  return guarded([&] {
    check_compatible(model, graph);
    emit(json_out, expath::training_metrics(graph->kg, model->model));
  });
}

expath_status expath_rules_evaluate(const expath_graph* graph, const char* request_json,
                                    char** json_out) {
  return guarded([&] {
    require(graph, "graph");
    const auto req = parse_json(request_json, "rules request");
    expath::RunConfig config;
    if (req.contains("thresholds")) expath::from_json({{"thresholds", req.at("thresholds")}}, config);
    const auto rules = req.at("rules").get<std::vector<std::string>>();
    emit(json_out, expath::rules_command(graph->kg, rules, config.thresholds));
  });
}

expath_status expath_explain(const expath_graph* graph, const expath_model* model,
                             const char* request_json, char** json_out) {
  return guarded([&] {
    check_compatible(model, graph);
    const auto req = parse_json(request_json, "explain request");
    expath::RunConfig config;
    expath::from_json(req, config);
    config.validate();
    const auto& kg = graph->kg;

    std::vector<expath::Fact> predictions;
    if (req.contains("predictions")) {
      for (const auto& p : req.at("predictions")) {
        const auto f = expath::fact_from_json(kg, p);
        if (!kg.contains(expath::Split::test, f))
          throw expath::InvalidArgument("prediction is not in the test split: " + kg.to_string(f));
        predictions.push_back(f);
      }
    } else {
      predictions = expath::select_targets(model->model, kg, config.targets, config.seed).facts();
    }

    const auto explained = expath::explain_all(kg, model->model, predictions, config);
    auto list = nlohmann::json::array();
    auto dots = nlohmann::json::array();
    const bool want_dot = req.value("dot", false);
    for (const auto& e : explained) {
      list.push_back(expath::explanation_json(kg, e.explanation, e.rules));
      if (want_dot) dots.push_back(expath::explanation_dot(kg, e.explanation, e.rules));
    }
    nlohmann::json out = {{"explanations", list}};
    if (want_dot) out["dot"] = dots;
    emit(json_out, out);
  });
}

expath_status expath_attack(const expath_graph* graph, const char* request_json, char** json_out) {
  return guarded([&] {
    require(graph, "graph");
    expath::RunConfig config;
    expath::from_json(parse_json(request_json, "attack request"), config);
    emit(json_out, expath::attack_command(graph->kg, config));
  });
}

expath_status expath_fuse(const char* report_x_json, const char* report_y_json, char** json_out) {
  return guarded([&] {
    emit(json_out, expath::fuse_command(parse_json(report_x_json, "first report"),
                                        parse_json(report_y_json, "second report")));
  });
}

expath_status expath_report(const char* reports_json, char** json_out, char** table_out) {
  return guarded([&] {
    const auto docs = parse_json(reports_json, "report list");
    if (!docs.is_array()) throw expath::InvalidArgument("report list must be a JSON array");
    std::vector<nlohmann::json> list(docs.begin(), docs.end());
    const auto summary = expath::report_command(list);
    std::string table = expath::report_table(summary);
    emit(json_out, summary);
    if (table_out) *table_out = dup_string(table);
  });
}

expath_status expath_synth(const char* spec_json, const char* out_dir, char** json_out) {
  return guarded([&] {
    require(out_dir, "output directory");
    expath::SyntheticSpec spec;
    expath::from_json(parse_json(spec_json, "synthetic spec"), spec);
    const auto data = expath::generate(spec);
    expath::write_dataset(out_dir, spec, data);
    emit(json_out, {{"spec", spec},
                    {"body_pairs", data.body_pairs},
                    {"head_facts", data.head_facts},
                    {"counts", {{"train", data.train.size()}, {"valid", data.valid.size()}, {"test", data.test.size()}}}});
  });
}

}  // extern "C"
