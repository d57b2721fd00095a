#ifndef RUGSCAN_H
#define RUGSCAN_H

/*
 * C interface to the rug-pull scanner. The CLI and any other frontend link
 * against this and nothing else.
 *
 * Conventions:
 *   - Every operation returns rs_status. Non-zero matches the process exit
 *     code taxonomy (2 config, 3 input, 4 internal).
 *   - On failure, rs_last_error() describes what went wrong. The string is
 *     thread local and valid until the next rugscan call on that thread.
 *   - Output strings (char**) are heap allocated; release them with
 *     rs_string_free(). Out parameters may be NULL when the caller does not
 *     want that output. On failure, out parameters are left untouched.
 *   - JSON in, JSON out: configuration enters as the text form produced by
 *     rs_default_config_json(), reports come back as JSON documents.
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rs_status {
  RS_OK = 0,
  RS_ERR_CONFIG = 2,   /* bad configuration or missing model */
  RS_ERR_INPUT = 3,    /* bad address, bundle, manifest or endpoint data */
  RS_ERR_INTERNAL = 4, /* invariant violation; report it */
} rs_status;

/* Library version, a static string. */
const char* rs_version(void);

/* Message for the most recent failure on this thread ("" when none). */
const char* rs_last_error(void);

/* Frees any string returned through a char** out parameter. NULL is fine. */
void rs_string_free(char* s);

/* Baseline configuration as JSON text. Edit and feed to rs_ctx_new. */
rs_status rs_default_config_json(char** out_json);

/* Parses and validates configuration text without building a context. */
rs_status rs_config_check(const char* config_json);

/*
 * A context carries one validated configuration plus the lazily loaded
 * model checkpoint. Contexts are cheap; operations on one context may run
 * from several threads at once. NULL config_json means defaults.
 */
typedef struct rs_ctx rs_ctx;
rs_status rs_ctx_new(const char* config_json, rs_ctx** out_ctx);
void rs_ctx_free(rs_ctx* ctx);

/*
 * Downloads bytecode and transfer history for one token address and caches
 * the bundle under the configured cache directory. A complete cache entry
 * short-circuits the network. offline != 0 forbids network use entirely.
 * Returns fetch statistics as JSON (bundle_dir, pages, duplicates, ...).
 */
rs_status rs_fetch(rs_ctx* ctx, const char* address, int offline, char** out_stats_json);

/*
 * Full detection pipeline on one token. `target` is either a bundle
 * directory or a token address (fetched through the cache first). Requires
 * a model checkpoint (RS_ERR_CONFIG when unset or unreadable). out_json is
 * the detection report; out_text a human-readable rendering with timings.
 */
rs_status rs_scan(rs_ctx* ctx, const char* target, int offline, char** out_json,
                  char** out_text);

/* Dumps the two graphs a scan would run on, as one JSON document. */
rs_status rs_graphs(rs_ctx* ctx, const char* target, int offline, char** out_json);

/*
 * Runs the risk rules alone. `target` is a bundle directory or a file
 * holding hex bytecode. No model or events needed.
 */
rs_status rs_rules_check(rs_ctx* ctx, const char* target, char** out_json);

/*
 * Builds the 16 planted/defused fixtures and checks each produces exactly
 * its own finding (or none). Always returns the result table; "pass" tells
 * whether the rule engine is healthy.
 */
rs_status rs_rules_selftest(char** out_json);

/*
 * Writes the deterministic synthetic benchmark to out_dir: one bundle
 * directory per token, a manifest.jsonl the training commands accept, and
 * signals.json recording which signal (code, transactions, both) each rug
 * token carries. Same seed and counts always produce the same bytes.
 */
rs_status rs_synth(const char* out_dir, unsigned long long seed, int rug_count,
                   int benign_count, char** out_json);

/*
 * Trains a full model on a labeled dataset manifest (JSON lines of
 * {id, label, bundle_path}). 80/20 stratified train/validation split,
 * early stopping on validation F1. Writes the best checkpoint to
 * checkpoint_out (falls back to the configured checkpoint_path) and
 * returns a training summary. Same seed and data give a byte-identical
 * checkpoint.
 */
rs_status rs_train(rs_ctx* ctx, const char* manifest_path, const char* checkpoint_out,
                   unsigned long long seed, char** out_summary_json);

/* Evaluates the configured checkpoint over a whole manifest. */
rs_status rs_eval(rs_ctx* ctx, const char* manifest_path, char** out_metrics_json);

/*
 * Five-fold cross-validation of the full model and every ablation variant
 * on one manifest. out_json is machine-readable, out_table a text table.
 */
rs_status rs_ablation(rs_ctx* ctx, const char* manifest_path, unsigned long long seed,
                      char** out_json, char** out_table);

/*
 * Scans a list of addresses (text file, one address per line, # comments).
 * Per address: fetch through the cache, screen for the six core selectors,
 * scan, write <out_dir>/<address>.json. Failures are isolated into rows.
 * workers bounds parallelism (<= 0 means 1). Also writes
 * <out_dir>/summary.json and returns the same summary.
 */
rs_status rs_sweep(rs_ctx* ctx, const char* list_path, const char* out_dir, int workers,
                   int offline, char** out_summary_json);

#ifdef __cplusplus
}
#endif

#endif /* RUGSCAN_H */
