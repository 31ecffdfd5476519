/* auditlab C API: opaque handles, status codes, JSON parameter documents.
 *
 * Every function returns AUDLAB_OK (0) on success or a nonzero status code;
 * audlab_last_error() returns a thread-local message for the most recent
 * failure on the calling thread. Strings returned through char** are heap
 * allocated and must be released with audlab_string_free(). Parameter and
 * result documents are UTF-8 JSON; the schemas are described in the README.
 */
#ifndef AUDITLAB_H
#define AUDITLAB_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct audlab_platform audlab_platform;
typedef struct audlab_server audlab_server;

enum audlab_status {
  AUDLAB_OK = 0,
  AUDLAB_ERR_NULL_ARGUMENT = 1,
  AUDLAB_ERR_INVALID_ARGUMENT = 2,
  AUDLAB_ERR_PARSE = 3,
  AUDLAB_ERR_UNKNOWN_ID = 4,
  AUDLAB_ERR_IO = 5,
  AUDLAB_ERR_NET = 6,
  AUDLAB_ERR_BUDGET_EXHAUSTED = 7,
  AUDLAB_ERR_ESTIMATOR = 8,
  AUDLAB_ERR_RUNTIME = 9
};

const char* audlab_version(void);
const char* audlab_last_error(void);
void audlab_string_free(char* s);

/* config_json: generator-config object; null or "{}" uses the defaults.     */
int audlab_platform_generate(const char* config_json, audlab_platform** out);
/* document: a platform file as produced by audlab_platform_to_json.         */
int audlab_platform_from_json(const char* document, audlab_platform** out);
int audlab_platform_to_json(const audlab_platform* platform, char** out_document);
void audlab_platform_free(audlab_platform* platform);

int audlab_platform_counts(const audlab_platform* platform,
                           uint64_t* out_creators, uint64_t* out_videos);
int audlab_platform_true_parity(const audlab_platform* platform, double* out);

/* params: {"t","beta","seed","strategy","proxy","recheck_arm1"}             */
int audlab_audit(const audlab_platform* platform, const char* params_json,
                 char** out_result);
/* Same params, executed against a running server session.                   */
int audlab_remote_audit(const char* host, int port, const char* params_json,
                        char** out_result);
/* params: {"strategy","xs","runs","seed"}; xs is an array or "lo:hi:step".  */
int audlab_sweep(const audlab_platform* platform, const char* params_json,
                 char** out_result);
/* params: {"strategy","t","betas","runs","seed","proxy"}                    */
int audlab_pareto(const audlab_platform* platform, const char* params_json,
                  char** out_result);
/* params: {"train","test","error_rate","seed","epochs","learning_rate",
 *          "di_orientation","name_table"}                                   */
int audlab_census(const char* params_json, char** out_result);

/* params: {"bind","port","strategy","budget_limit","rate_limit"}. The server
 * keeps its own copy of the platform and runs on background threads until
 * stopped; the platform handle may be freed while it serves.               */
int audlab_serve(const audlab_platform* platform, const char* params_json,
                 audlab_server** out);
int audlab_server_port(const audlab_server* server, int* out_port);
int audlab_server_stop(audlab_server* server);
void audlab_server_free(audlab_server* server);

#ifdef __cplusplus
}
#endif

#endif /* AUDITLAB_H */
