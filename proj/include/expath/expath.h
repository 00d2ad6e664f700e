#ifndef EXPATH_EXPATH_H
#define EXPATH_EXPATH_H

/*
 * C interface to the expath library.
 *
 * Every fallible call returns an expath_status. On failure the message is
 * available from expath_last_error() on the same thread until the next call.
 * Strings returned through `char**` are owned by the caller and released with
 * expath_string_free(). Requests and results are UTF-8 JSON documents.
 */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define EXPATH_API __declspec(dllexport)
#else
#define EXPATH_API __attribute__((visibility("default")))
#endif

typedef enum expath_status {
  EXPATH_OK = 0,
  EXPATH_ERR_INVALID_ARGUMENT = 1,
  EXPATH_ERR_PARSE = 2,
  EXPATH_ERR_LOOKUP = 3,
  EXPATH_ERR_IO = 4,
  EXPATH_ERR_RUNTIME = 5
} expath_status;

typedef struct expath_graph expath_graph;
typedef struct expath_model expath_model;

EXPATH_API const char* expath_version(void);
EXPATH_API const char* expath_last_error(void);
EXPATH_API const char* expath_status_name(expath_status status);
EXPATH_API void expath_string_free(char* s);

/* Dataset directory with train.txt, valid.txt and test.txt. */
EXPATH_API expath_status expath_graph_load(const char* dir, expath_graph** out);
EXPATH_API void expath_graph_free(expath_graph* graph);
/* {entities, relations, train, valid, test, duplicates: {...}} */
EXPATH_API expath_status expath_graph_stats(const expath_graph* graph, char** json_out);

/* config_json: model config object (family, dim, epochs, lr, neg, batch, reg,
 * margin, seed, mimic_epochs, mimic_lr_scale); missing keys keep defaults. */
EXPATH_API expath_status expath_model_train(const expath_graph* graph, const char* config_json,
                                            expath_model** out);
/* Checkpoint prefix: <prefix>.meta.json and <prefix>.emb.bin. */
EXPATH_API expath_status expath_model_save(const expath_model* model, const char* prefix);
EXPATH_API expath_status expath_model_load(const char* prefix, expath_model** out);
EXPATH_API void expath_model_free(expath_model* model);
/* Filtered MRR / H@1 per split plus counts. */
EXPATH_API expath_status expath_model_evaluate(const expath_model* model, const expath_graph* graph,
                                               char** json_out);

/* request: {rules: ["head <- b1, b2'", ...], thresholds: {...}} */
EXPATH_API expath_status expath_rules_evaluate(const expath_graph* graph, const char* request_json,
                                               char** json_out);

/* request: run config keys plus either predictions: [{h, r, t}] (test facts)
 * or targets: N for a seeded sample; dot: true adds Graphviz sources. */
EXPATH_API expath_status expath_explain(const expath_graph* graph, const expath_model* model,
                                        const char* request_json, char** json_out);

/* request: run config (model, k, targets, seed, runs, method, ...). Trains,
 * explains, attacks and returns the report document. */
EXPATH_API expath_status expath_attack(const expath_graph* graph, const char* request_json,
                                       char** json_out);

EXPATH_API expath_status expath_fuse(const char* report_x_json, const char* report_y_json,
                                     char** json_out);

/* reports_json: array of report documents. Writes the markdown table to
 * table_out when it is not NULL. */
EXPATH_API expath_status expath_report(const char* reports_json, char** json_out, char** table_out);

/* Generates a planted-rule dataset into out_dir; returns {counts, body_pairs, head_facts, spec}. */
EXPATH_API expath_status expath_synth(const char* spec_json, const char* out_dir, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* EXPATH_EXPATH_H */
