/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SLOTMACHINE_H
#define SLOTMACHINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes shared by every entry point.
 */
typedef enum SlmStatus {
  SLM_STATUS_OK = 0,
  SLM_STATUS_NULL_POINTER = 1,
  SLM_STATUS_INVALID_ARGUMENT = 2,
  SLM_STATUS_IO = 3,
  SLM_STATUS_FORMAT = 4,
  SLM_STATUS_SHAPE = 5,
  SLM_STATUS_TRAINING = 6,
  SLM_STATUS_BUFFER_TOO_SMALL = 7,
  SLM_STATUS_INTERNAL = 8,
  SLM_STATUS_PANIC = 9,
} SlmStatus;

/*
 Opaque network handle.
 */
typedef struct SlmNetwork SlmNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Static NUL-terminated version string.
 */
const char *slm_version(void);

/*
 Static NUL-terminated name of a status code.
 */
const char *slm_status_name(enum SlmStatus status);

/*
 Copies the calling thread's last error message into `buf` (NUL
 terminated, when `len` suffices) and returns the size it needs.

 # Safety
 `buf` is null or writable for `len` bytes.
 */
size_t slm_last_error_message(char *buf, size_t len);

/*
 New slot network with `k` options per connection. `arch` is one of
 `lenet`, `conv2`, `conv4`, `conv6`.

 # Safety
 `arch` is a NUL-terminated string; `out` is writable.
 */
enum SlmStatus slm_network_new_slot(const char *arch,
                                    size_t k,
                                    uint64_t seed,
                                    bool sparse,
                                    struct SlmNetwork **out);

/*
 Network stored in a training checkpoint.

 # Safety
 `path` is a NUL-terminated string; `out` is writable.
 */
enum SlmStatus slm_network_load_checkpoint(const char *path, struct SlmNetwork **out);

/*
 Plain network made of the highest-score options of `net`.

 # Safety
 `net` is a live handle; `out` is writable.
 */
enum SlmStatus slm_network_export(const struct SlmNetwork *net, struct SlmNetwork **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `net` is null or a handle not yet freed.
 */
void slm_network_free(struct SlmNetwork *net);

/*
 Number of connections (weights without biases).

 # Safety
 `net` is a live handle; `out` is writable.
 */
enum SlmStatus slm_network_connections(const struct SlmNetwork *net, size_t *out);

/*
 Floats per input example (`C * H * W`).

 # Safety
 `net` is a live handle; `out` is writable.
 */
enum SlmStatus slm_network_input_len(const struct SlmNetwork *net, size_t *out);

/*
 Whether the network still holds options and scores.

 # Safety
 `net` is a live handle; `out` is writable.
 */
enum SlmStatus slm_network_is_slot(const struct SlmNetwork *net, bool *out);

/*
 Evaluation-mode logits for `batch` examples laid out `[batch, C, H, W]`.
 Slot networks use their highest-score options. `logits` receives
 `batch * 10` floats.

 # Safety
 `input` is readable for `input_len` floats and `logits` writable for
 `logits_len` floats.
 */
enum SlmStatus slm_network_predict(const struct SlmNetwork *net,
                                   const float *input,
                                   size_t input_len,
                                   size_t batch,
                                   float *logits,
                                   size_t logits_len);

/*
 Hex SHA-256 of all option tensors. `buf` needs 65 bytes.

 # Safety
 `net` is a live handle; `buf` is writable for `len` bytes.
 */
enum SlmStatus slm_network_options_digest(const struct SlmNetwork *net, char *buf, size_t len);

/*
 Fraction of connections of a sparse slot network that select the pinned
 zero option.

 # Safety
 `net` is a live handle; `out` is writable.
 */
enum SlmStatus slm_network_sparsity(const struct SlmNetwork *net, float *out);

/*
 Trains from a JSON-encoded training configuration and reports the test
 accuracy of the best-validation snapshot. When `out` is non-null it
 receives the trained network.

 # Safety
 `config_json` is a NUL-terminated string; `test_acc` is writable; `out`
 is null or writable.
 */
enum SlmStatus slm_train_json(const char *config_json, float *test_acc, struct SlmNetwork **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOTMACHINE_H */
