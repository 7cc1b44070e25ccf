#ifndef HARNET_H
#define HARNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HarnetScale {
  /*
   Pixels in [0, 255]
   */
  HARNET_SCALE_RAW255 = 0,
  /*
   Pixels in [0, 1]
   */
  HARNET_SCALE_UNIT = 1,
} HarnetScale;

/*
 Result code of every fallible call.
 */
typedef enum HarnetStatus {
  HARNET_STATUS_OK = 0,
  HARNET_STATUS_NULL_POINTER = 1,
  HARNET_STATUS_INVALID_ARGUMENT = 2,
  HARNET_STATUS_IO = 3,
  HARNET_STATUS_FORMAT = 4,
  HARNET_STATUS_CHECKPOINT = 5,
  HARNET_STATUS_NUMERICAL = 6,
  HARNET_STATUS_METRIC = 7,
  HARNET_STATUS_PANIC = 99,
} HarnetStatus;

/*
 Opaque grayscale angiogram.
 */
typedef struct HarnetImage HarnetImage;

/*
 Opaque reconstruction network.
 */
typedef struct HarnetModel HarnetModel;

/*
 Network shape. See `harnet_spec_paper` and `harnet_spec_desk`.
 */
typedef struct HarnetModelSpec {
  size_t low_level_channels;
  size_t block_count;
  size_t layers_per_block;
  size_t block_channels;
} HarnetModelSpec;

typedef struct HarnetMetrics {
  double noise_intensity;
  double contrast_rms;
  double connectivity;
} HarnetMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next failing call on the same thread.
 */
const char *harnet_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *harnet_version(void);

/*
 Copies `width * height` row-major pixels into a new image.

 # Safety
 `pixels` must point to `width * height` floats; `id` may be NULL.
 */
enum HarnetStatus harnet_image_new(const char *id,
                                   size_t width,
                                   size_t height,
                                   const float *pixels,
                                   enum HarnetScale scale,
                                   double fov_mm,
                                   struct HarnetImage **out);

/*
 Loads a PNG or PGM image together with its `.meta` sidecar.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HarnetStatus harnet_image_load(const char *path, struct HarnetImage **out);

/*
 # Safety
 `image` must come from this library; `path` must be NUL-terminated.
 */
enum HarnetStatus harnet_image_save(const struct HarnetImage *image, const char *path);

/*
 Width in pixels; 0 for NULL.

 # Safety
 `image` must be NULL or come from this library.
 */
size_t harnet_image_width(const struct HarnetImage *image);

/*
 Height in pixels; 0 for NULL.

 # Safety
 `image` must be NULL or come from this library.
 */
size_t harnet_image_height(const struct HarnetImage *image);

/*
 # Safety
 `image` must come from this library; `scale` must be writable.
 */
enum HarnetStatus harnet_image_scale(const struct HarnetImage *image, enum HarnetScale *scale);

/*
 Copies the pixels into `buffer`, which must hold `len >= width * height`
 floats.

 # Safety
 `buffer` must point to `len` writable floats.
 */
enum HarnetStatus harnet_image_pixels(const struct HarnetImage *image, float *buffer, size_t len);

/*
 # Safety
 `image` must be NULL or come from this library, and not be used again.
 */
void harnet_image_free(struct HarnetImage *image);

struct HarnetModelSpec harnet_spec_paper(void);

struct HarnetModelSpec harnet_spec_desk(void);

/*
 Builds a freshly initialized network. An untrained network is the
 identity map.

 # Safety
 `out` must be writable.
 */
enum HarnetStatus harnet_model_build(struct HarnetModelSpec spec,
                                     uint64_t seed,
                                     struct HarnetModel **out);

/*
 # Safety
 `path` must be NUL-terminated; `out` must be writable.
 */
enum HarnetStatus harnet_model_load(const char *path, struct HarnetModel **out);

/*
 Writes a checkpoint with empty training metadata.

 # Safety
 `model` must come from this library; `path` must be NUL-terminated.
 */
enum HarnetStatus harnet_model_save(const struct HarnetModel *model, const char *path);

/*
 # Safety
 `model` must come from this library; `spec` must be writable.
 */
enum HarnetStatus harnet_model_spec(const struct HarnetModel *model, struct HarnetModelSpec *spec);

/*
 # Safety
 `model` must be NULL or come from this library, and not be used again.
 */
void harnet_model_free(struct HarnetModel *model);

/*
 Whole-image inference. The output keeps the input's size, scale, field
 of view and id.

 # Safety
 `model` and `image` must come from this library; `out` must be writable.
 */
enum HarnetStatus harnet_reconstruct(const struct HarnetModel *model,
                                     const struct HarnetImage *image,
                                     struct HarnetImage **out);

/*
 Noise intensity in a centered circle of `diameter_mm`, RMS contrast and
 connectivity, all on the 0-255 scale.

 # Safety
 `image` must come from this library; `out` must be writable.
 */
enum HarnetStatus harnet_metrics(const struct HarnetImage *image,
                                 double diameter_mm,
                                 struct HarnetMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARNET_H */
