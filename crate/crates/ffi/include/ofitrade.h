#ifndef OFITRADE_H
#define OFITRADE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stdint.h>

// Number of OFI levels expected by the model.
#define OFIT_LEVELS 10

// Number of alpha horizons produced by the model.
#define OFIT_HORIZONS 6

typedef enum OfitStatus {
  OFIT_STATUS_OK = 0,
  OFIT_STATUS_NULL_POINTER = 1,
  OFIT_STATUS_INVALID_ARGUMENT = 2,
  OFIT_STATUS_IO = 3,
  OFIT_STATUS_FORMAT = 4,
  OFIT_STATUS_ORDERING = 5,
  OFIT_STATUS_ARTIFACT = 6,
  OFIT_STATUS_INTERNAL = 7,
  OFIT_STATUS_PANIC = 8,
} OfitStatus;

typedef enum OfitPosition {
  OFIT_POSITION_LONG = 0,
  OFIT_POSITION_SHORT = 1,
} OfitPosition;

typedef enum OfitAction {
  OFIT_ACTION_BUY = 0,
  OFIT_ACTION_SELL = 1,
} OfitAction;

typedef struct OfitAgent OfitAgent;

typedef struct OfitModel OfitModel;

typedef struct OfitSession OfitSession;

// Ten book levels per side, best level first.
typedef struct OfitBook {
  double ask_prices[OFIT_LEVELS];
  double ask_volumes[OFIT_LEVELS];
  double bid_prices[OFIT_LEVELS];
  double bid_volumes[OFIT_LEVELS];
} OfitBook;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty after a success. The
// pointer stays valid until the next call on the same thread.
const char *ofit_last_error(void);

// Library version as a static NUL-terminated string.
const char *ofit_version(void);

// Loads an alpha model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum OfitStatus ofit_model_load(const char *path, struct OfitModel **out);

// # Safety
// `model` must come from `ofit_model_load` and not be freed twice.
void ofit_model_free(struct OfitModel *model);

// Predicts the six alphas (price units) from ten OFI values.
//
// # Safety
// `ofi` must point to 10 doubles and `alphas_out` to room for 6.
enum OfitStatus ofit_model_predict(const struct OfitModel *model,
                                   const double *ofi,
                                   double *alphas_out);

// Loads a trained agent file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum OfitStatus ofit_agent_load(const char *path, struct OfitAgent **out);

// # Safety
// `agent` must come from `ofit_agent_load` and not be freed twice.
void ofit_agent_free(struct OfitAgent *agent);

// Greedy action for six alphas in pips and the current position.
//
// # Safety
// `alphas_pips` must point to 6 doubles and `action_out` be writable.
enum OfitStatus ofit_agent_decide(const struct OfitAgent *agent,
                                  const double *alphas_pips,
                                  enum OfitPosition position,
                                  enum OfitAction *action_out);

// Opens a signal session. The model and agent are shared, so their handles
// may be freed independently of the session.
//
// # Safety
// `instrument_toml` must be a NUL-terminated path; the handles must be live.
enum OfitStatus ofit_session_new(const char *instrument_toml,
                                 const struct OfitModel *model,
                                 const struct OfitAgent *agent,
                                 struct OfitSession **out);

// Feeds one tick; timestamps must strictly increase within a session.
//
// # Safety
// `ofi` must point to 10 doubles; the out pointers must be writable.
enum OfitStatus ofit_session_signal(struct OfitSession *session,
                                    int64_t timestamp_ms,
                                    const double *ofi,
                                    double mid,
                                    enum OfitAction *action_out,
                                    bool *changed_out);

// Net PnL of the session so far, marked at the last mid.
//
// # Safety
// `session` must be live and `pnl_out` writable.
enum OfitStatus ofit_session_pnl(const struct OfitSession *session, double *pnl_out);

// # Safety
// `session` must come from `ofit_session_new` and not be freed twice.
void ofit_session_free(struct OfitSession *session);

// Order flow imbalance per level between two consecutive books.
//
// # Safety
// `prev` and `cur` must be valid books; `ofi_out` must have room for 10.
enum OfitStatus ofit_ofi(const struct OfitBook *prev, const struct OfitBook *cur, double *ofi_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFITRADE_H */
