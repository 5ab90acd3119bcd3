#ifndef PROMPTSEG_H
#define PROMPTSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_IO = 3,
  PS_STATUS_PARSE = 4,
  PS_STATUS_CONFIG = 5,
  PS_STATUS_BACKEND = 6,
  PS_STATUS_DIMENSION = 7,
  PS_STATUS_INTERNAL = 8,
} PsStatus;

// Opaque confusion-matrix accumulator.
typedef struct PsConfusion PsConfusion;

// Opaque prompt set.
typedef struct PsPromptSet PsPromptSet;

typedef struct PsBox {
  double x_min;
  double y_min;
  double x_max;
  double y_max;
} PsBox;

typedef struct PsDetection {
  struct PsBox bbox;
  // Canonical class id, `>= 1`.
  uint8_t class_id;
  double confidence;
} PsDetection;

typedef struct PsReport {
  double miou;
  double pixel_accuracy;
  double pixel_precision;
  double pixel_recall;
  double dice;
  size_t image_count;
  uint64_t pixel_count;
} PsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *ps_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// Intersection over union of two boxes.
//
// # Safety
// `a`, `b` and `out` must be valid pointers.
enum PsStatus ps_box_iou(const struct PsBox *a, const struct PsBox *b, double *out);

// Per-class greedy NMS. Writes the indices of kept detections, in
// acceptance order, to `kept` (capacity `len`) and their number to `kept_len`.
//
// # Safety
// `dets` must point to `len` detections and `kept` to room for `len` indices.
enum PsStatus ps_nms(const struct PsDetection *dets,
                     size_t len,
                     double overlap_threshold,
                     size_t *kept,
                     size_t *kept_len);

// Numerically stable softmax of `len` scores into `out`.
//
// # Safety
// `scores` and `out` must each point to `len` doubles.
enum PsStatus ps_softmax(const double *scores, size_t len, double *out);

// Load and validate a TOML prompt file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PsStatus ps_prompt_set_load(const char *path, struct PsPromptSet **out);

// Number of task classes `K`.
//
// # Safety
// `ps` must be a live handle.
enum PsStatus ps_prompt_set_class_number(const struct PsPromptSet *ps, uint8_t *out);

// Class id for a raw detector label, or 0 when it names no class.
//
// # Safety
// `ps` must be a live handle and `label` a NUL-terminated string.
enum PsStatus ps_prompt_set_canonicalize(const struct PsPromptSet *ps,
                                         const char *label,
                                         uint8_t *out_class);

// # Safety
// `ps` must be null or a handle not yet freed.
void ps_prompt_set_free(struct PsPromptSet *ps);

// # Safety
// `out` must be a valid pointer.
enum PsStatus ps_confusion_new(uint8_t class_number, struct PsConfusion **out);

// Add one row-major `width x height` pair of label maps.
//
// # Safety
// `cm` must be a live handle; `pred` and `gt` must each point to
// `width * height` bytes.
enum PsStatus ps_confusion_accumulate(struct PsConfusion *cm,
                                      const uint8_t *pred,
                                      const uint8_t *gt,
                                      uint32_t width,
                                      uint32_t height);

// # Safety
// `cm` must be a live handle and `out` a valid pointer.
enum PsStatus ps_confusion_report(const struct PsConfusion *cm, struct PsReport *out);

// # Safety
// `cm` must be null or a handle not yet freed.
void ps_confusion_free(struct PsConfusion *cm);

// Run the pipeline configured by `config_path` over `images_dir`, writing
// label maps and the manifest to `out_dir`. Per-image failures do not fail
// the call; their number is written to `failures`.
//
// # Safety
// Strings must be NUL-terminated; `failures` may be null.
enum PsStatus ps_run(const char *config_path,
                     const char *images_dir,
                     const char *out_dir,
                     size_t *failures);

// Score `<stem>.png` label maps in `pred_dir` against `gt_dir`.
//
// # Safety
// Strings must be NUL-terminated and `out` a valid pointer.
enum PsStatus ps_evaluate(const char *pred_dir,
                          const char *gt_dir,
                          uint8_t class_number,
                          struct PsReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROMPTSEG_H */
