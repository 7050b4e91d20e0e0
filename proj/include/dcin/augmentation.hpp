#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dcin/error.hpp"
#include "dcin/image.hpp"
#include "dcin/rng.hpp"

namespace dcin {

// ---------------------------------------------------------------------------
// Sampled transform parameters
// ---------------------------------------------------------------------------

struct ElasticParams {
  double alpha = 0.0;  // displacement magnitude, px
  double sigma = 1.0;  // field smoothing, px
  std::uint64_t seed = 0;

  bool operator==(const ElasticParams&) const = default;
};

struct GeometricParams {
  bool hflip = false;
  std::optional<std::array<double, 2>> shift;  // (dx, dy) as width/height fractions
  std::optional<double> scale;
  std::optional<double> rotate_deg;
  std::optional<double> shear_deg;
  std::optional<ElasticParams> elastic;

  bool is_identity() const {
    return !hflip && !shift && !scale && !rotate_deg && !shear_deg && !elastic;
  }
  bool operator==(const GeometricParams&) const = default;
};

struct NoiseParams {
  double sigma = 0.0;  // in 8-bit units
  std::uint64_t seed = 0;

  bool operator==(const NoiseParams&) const = default;
};

struct BrightnessContrastParams {
  double brightness = 0.0;  // additive, fraction of 255
  double contrast = 1.0;    // multiplicative about mid-gray

  bool operator==(const BrightnessContrastParams&) const = default;
};

struct PhotometricParams {
  std::optional<int> blur_radius;            // box kernel radius, px
  std::optional<double> sharpen;             // unsharp-mask strength in [0,1]
  std::optional<NoiseParams> gaussian_noise;
  std::optional<BrightnessContrastParams> brightness_contrast;
  std::optional<std::array<double, 3>> rgb_shift;  // per-channel additive, 8-bit units

  bool is_identity() const {
    return !blur_radius && !sharpen && !gaussian_noise && !brightness_contrast && !rgb_shift;
  }
  bool operator==(const PhotometricParams&) const = default;
};

/// Training pair: x1 = geometric(x), x2 = photometric(x1); both share y.
struct CqgPair {
  RgbImage x1;
  RgbImage x2;
  LabelMask y;
  GeometricParams geometric;
  PhotometricParams photometric;
};

// ---------------------------------------------------------------------------
// Sampling configuration (all defaults overridable via a JSON config file)
// ---------------------------------------------------------------------------

struct AugmentConfig {
  struct Toggle {
    double probability = 0.5;
  };
  struct Range {
    double probability = 0.5;
    double min = 0.0;
    double max = 0.0;
  };
  struct ElasticRange {
    double probability = 0.5;
    double alpha_min = 5.0, alpha_max = 30.0;
    double sigma_min = 4.0, sigma_max = 8.0;
  };
  struct BlurRange {
    double probability = 0.5;
    int radius_min = 1, radius_max = 3;
  };
  struct BrightnessContrastRange {
    double probability = 0.5;
    double brightness_min = -0.2, brightness_max = 0.2;
    double contrast_min = 0.8, contrast_max = 1.2;
  };

  Toggle hflip{};
  Range shift{0.5, -0.1, 0.1};
  Range scale{0.5, 0.9, 1.1};
  Range rotate{0.5, -15.0, 15.0};
  Range shear{0.5, -10.0, 10.0};
  ElasticRange elastic{};
  BlurRange blur{};
  Range sharpen{0.5, 0.0, 1.0};
  Range gaussian_noise{0.5, 0.0, 25.0};
  BrightnessContrastRange brightness_contrast{};
  Range rgb_shift{0.5, -20.0, 20.0};

  /// Sentinel configuration: every sub-transform disabled, sampling yields
  /// identity params.
  static AugmentConfig disabled() {
    AugmentConfig c;
    c.hflip.probability = 0.0;
    c.shift.probability = 0.0;
    c.scale.probability = 0.0;
    c.rotate.probability = 0.0;
    c.shear.probability = 0.0;
    c.elastic.probability = 0.0;
    c.blur.probability = 0.0;
    c.sharpen.probability = 0.0;
    c.gaussian_noise.probability = 0.0;
    c.brightness_contrast.probability = 0.0;
    c.rgb_shift.probability = 0.0;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Parameter sampling. Draw order is fixed (enable flag, then values, in
// declaration order); outputs are a pure function of (seed, config).
// ---------------------------------------------------------------------------

inline GeometricParams sample_geometric_params(std::uint64_t seed,
                                               const AugmentConfig& config = {}) {
  Rng rng(seed);
  GeometricParams p;
  p.hflip = rng.bernoulli(config.hflip.probability);
  if (rng.bernoulli(config.shift.probability))
    p.shift = {{rng.uniform(config.shift.min, config.shift.max),
                rng.uniform(config.shift.min, config.shift.max)}};
  if (rng.bernoulli(config.scale.probability))
    p.scale = rng.uniform(config.scale.min, config.scale.max);
  if (rng.bernoulli(config.rotate.probability))
    p.rotate_deg = rng.uniform(config.rotate.min, config.rotate.max);
  if (rng.bernoulli(config.shear.probability))
    p.shear_deg = rng.uniform(config.shear.min, config.shear.max);
  if (rng.bernoulli(config.elastic.probability)) {
    ElasticParams e;
    e.alpha = rng.uniform(config.elastic.alpha_min, config.elastic.alpha_max);
    e.sigma = rng.uniform(config.elastic.sigma_min, config.elastic.sigma_max);
    e.seed = rng.next_u64();
    p.elastic = e;
  }
  return p;
}

inline PhotometricParams sample_photometric_params(std::uint64_t seed,
                                                   const AugmentConfig& config = {}) {
  Rng rng(seed);
  PhotometricParams p;
  if (rng.bernoulli(config.blur.probability))
    p.blur_radius = static_cast<int>(
        rng.uniform_int(config.blur.radius_min, config.blur.radius_max));
  if (rng.bernoulli(config.sharpen.probability))
    p.sharpen = rng.uniform(config.sharpen.min, config.sharpen.max);
  if (rng.bernoulli(config.gaussian_noise.probability)) {
    NoiseParams noise;
    noise.sigma = rng.uniform(config.gaussian_noise.min, config.gaussian_noise.max);
    noise.seed = rng.next_u64();
    p.gaussian_noise = noise;
  }
  if (rng.bernoulli(config.brightness_contrast.probability)) {
    BrightnessContrastParams bc;
    bc.brightness = rng.uniform(config.brightness_contrast.brightness_min,
                                config.brightness_contrast.brightness_max);
    bc.contrast = rng.uniform(config.brightness_contrast.contrast_min,
                              config.brightness_contrast.contrast_max);
    p.brightness_contrast = bc;
  }
  if (rng.bernoulli(config.rgb_shift.probability))
    p.rgb_shift = {{rng.uniform(config.rgb_shift.min, config.rgb_shift.max),
                    rng.uniform(config.rgb_shift.min, config.rgb_shift.max),
                    rng.uniform(config.rgb_shift.min, config.rgb_shift.max)}};
  return p;
}

// ---------------------------------------------------------------------------
// Geometric application
// ---------------------------------------------------------------------------

namespace detail {

// Row-major 2x3 affine: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct Affine {
  double a = 1, b = 0, c = 0;
  double d = 0, e = 1, f = 0;

  static Affine identity() { return {}; }

  // this ∘ other (other applied first)
  Affine after(const Affine& o) const {
    Affine r;
    r.a = a * o.a + b * o.d;
    r.b = a * o.b + b * o.e;
    r.c = a * o.c + b * o.f + c;
    r.d = d * o.a + e * o.d;
    r.e = d * o.b + e * o.e;
    r.f = d * o.c + e * o.f + f;
    return r;
  }

  Affine inverse() const {
    double det = a * e - b * d;
    if (std::abs(det) < 1e-12) throw UsageError("degenerate geometric transform");
    Affine r;
    r.a = e / det;
    r.b = -b / det;
    r.d = -d / det;
    r.e = a / det;
    r.c = -(r.a * c + r.b * f);
    r.f = -(r.d * c + r.e * f);
    return r;
  }
};

inline Affine affine_from_params(const GeometricParams& p, int width, int height) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  Affine m = Affine::identity();
  if (p.hflip) m = Affine{-1, 0, 2 * cx, 0, 1, 0}.after(m);
  if (p.shift)
    m = Affine{1, 0, (*p.shift)[0] * width, 0, 1, (*p.shift)[1] * height}.after(m);
  if (p.scale) {
    double s = *p.scale;
    m = Affine{s, 0, cx * (1 - s), 0, s, cy * (1 - s)}.after(m);
  }
  if (p.rotate_deg) {
    double t = *p.rotate_deg * 3.14159265358979323846 / 180.0;
    double ct = std::cos(t), st = std::sin(t);
    m = Affine{ct, -st, cx - ct * cx + st * cy, st, ct, cy - st * cx - ct * cy}.after(m);
  }
  if (p.shear_deg) {
    double t = std::tan(*p.shear_deg * 3.14159265358979323846 / 180.0);
    m = Affine{1, t, -t * cy, 0, 1, 0}.after(m);
  }
  return m;
}

inline double bilinear_tap(const RgbImage& img, int x, int y, int c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;  // constant fill
  return img.at(x, y, c);
}

inline RgbImage warp_rgb(const RgbImage& src, const Affine& inv) {
  RgbImage out(src.width, src.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sx = inv.a * x + inv.b * y + inv.c;
      double sy = inv.d * x + inv.e * y + inv.f;
      int x0 = static_cast<int>(std::floor(sx));
      int y0 = static_cast<int>(std::floor(sy));
      double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        double top = bilinear_tap(src, x0, y0, c) * (1 - fx) + bilinear_tap(src, x0 + 1, y0, c) * fx;
        double bot = bilinear_tap(src, x0, y0 + 1, c) * (1 - fx) + bilinear_tap(src, x0 + 1, y0 + 1, c) * fx;
        double v = top * (1 - fy) + bot * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

inline LabelMask warp_mask(const LabelMask& src, const Affine& inv) {
  LabelMask out(src.width, src.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sx = inv.a * x + inv.b * y + inv.c;
      double sy = inv.d * x + inv.e * y + inv.f;
      int nx = static_cast<int>(std::floor(sx + 0.5));
      int ny = static_cast<int>(std::floor(sy + 0.5));
      out.at(x, y) = (nx < 0 || ny < 0 || nx >= src.width || ny >= src.height)
                         ? 0  // background fill
                         : src.at(nx, ny);
    }
  }
  return out;
}

/// Gaussian-smoothed uniform(-1,1) displacement fields scaled by alpha
/// (the standard elastic-transform construction).
struct ElasticField {
  std::vector<double> dx, dy;
};

inline void gaussian_smooth(std::vector<double>& field, int width, int height, double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  std::vector<double> tmp(field.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int xi = std::clamp(x + i, 0, width - 1);
        acc += field[static_cast<std::size_t>(y) * width + xi] * kernel[i + radius];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int yi = std::clamp(y + i, 0, height - 1);
        acc += tmp[static_cast<std::size_t>(yi) * width + x] * kernel[i + radius];
      }
      field[static_cast<std::size_t>(y) * width + x] = acc;
    }
}

inline ElasticField make_elastic_field(const ElasticParams& p, int width, int height) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.alpha))
    throw UsageError("elastic params need sigma > 0 and finite alpha");
  ElasticField f;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  f.dx.resize(n);
  f.dy.resize(n);
  Rng rng(p.seed);
  for (std::size_t i = 0; i < n; ++i) f.dx[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) f.dy[i] = rng.uniform(-1.0, 1.0);
  gaussian_smooth(f.dx, width, height, p.sigma);
  gaussian_smooth(f.dy, width, height, p.sigma);
  for (std::size_t i = 0; i < n; ++i) {
    f.dx[i] *= p.alpha;
    f.dy[i] *= p.alpha;
  }
  return f;
}

inline RgbImage elastic_warp_rgb(const RgbImage& src, const ElasticField& field) {
  RgbImage out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * src.width + x;
      double sx = x + field.dx[i];
      double sy = y + field.dy[i];
      int x0 = static_cast<int>(std::floor(sx));
      int y0 = static_cast<int>(std::floor(sy));
      double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        double top = bilinear_tap(src, x0, y0, c) * (1 - fx) + bilinear_tap(src, x0 + 1, y0, c) * fx;
        double bot = bilinear_tap(src, x0, y0 + 1, c) * (1 - fx) + bilinear_tap(src, x0 + 1, y0 + 1, c) * fx;
        double v = top * (1 - fy) + bot * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  return out;
}

inline LabelMask elastic_warp_mask(const LabelMask& src, const ElasticField& field) {
  LabelMask out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * src.width + x;
      int nx = static_cast<int>(std::floor(x + field.dx[i] + 0.5));
      int ny = static_cast<int>(std::floor(y + field.dy[i] + 0.5));
      out.at(x, y) = (nx < 0 || ny < 0 || nx >= src.width || ny >= src.height)
                         ? 0
                         : src.at(nx, ny);
    }
  return out;
}

}  // namespace detail

/// Applies one composed affine map (flip, shift, scale, rotate, shear about
/// the image center) then optional elastic displacement. The image resamples
/// bilinearly, the mask by nearest neighbor; out-of-bounds regions fill with
/// 0 / background. Output dimensions match the input.
inline std::pair<RgbImage, LabelMask> apply_geometric(const RgbImage& image,
                                                      const LabelMask& mask,
                                                      const GeometricParams& params) {
  check_valid(image);
  check_valid(mask);
  if (image.width != mask.width || image.height != mask.height)
    throw UsageError("apply_geometric: image and mask dimensions differ");
  if (params.is_identity()) return {image, mask};

  RgbImage out_image = image;
  LabelMask out_mask = mask;
  bool has_affine =
      params.hflip || params.shift || params.scale || params.rotate_deg || params.shear_deg;
  if (has_affine) {
    detail::Affine inv =
        detail::affine_from_params(params, image.width, image.height).inverse();
    out_image = detail::warp_rgb(image, inv);
    out_mask = detail::warp_mask(mask, inv);
  }
  if (params.elastic) {
    detail::ElasticField field =
        detail::make_elastic_field(*params.elastic, image.width, image.height);
    out_image = detail::elastic_warp_rgb(out_image, field);
    out_mask = detail::elastic_warp_mask(out_mask, field);
  }
  return {std::move(out_image), std::move(out_mask)};
}

// ---------------------------------------------------------------------------
// Photometric application
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

/// Separable box blur; windows clamp at borders and normalize by the actual
/// tap count, so edges do not darken.
inline RgbImage box_blur(const RgbImage& src, int radius) {
  if (radius < 1) throw UsageError("blur radius must be >= 1");
  std::vector<double> tmp(src.data.size());
  RgbImage out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      int lo = std::max(0, x - radius), hi = std::min(src.width - 1, x + radius);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int xi = lo; xi <= hi; ++xi) acc += src.at(xi, y, c);
        tmp[(static_cast<std::size_t>(y) * src.width + x) * 3 + c] = acc / (hi - lo + 1);
      }
    }
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      int lo = std::max(0, y - radius), hi = std::min(src.height - 1, y + radius);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int yi = lo; yi <= hi; ++yi)
          acc += tmp[(static_cast<std::size_t>(yi) * src.width + x) * 3 + c];
        out.at(x, y, c) = clamp8(acc / (hi - lo + 1));
      }
    }
  return out;
}

}  // namespace detail

/// Applies enabled photometric sub-transforms in fixed order:
/// blur -> sharpen -> noise -> brightness/contrast -> rgb shift.
/// Geometry is untouched; each stage clips samples to [0,255].
inline RgbImage apply_photometric(const RgbImage& image, const PhotometricParams& params) {
  check_valid(image);
  if (params.is_identity()) return image;

  RgbImage out = image;
  if (params.blur_radius) out = detail::box_blur(out, *params.blur_radius);
  if (params.sharpen) {
    RgbImage blurred = detail::box_blur(out, 1);
    double s = *params.sharpen;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      double v = out.data[i];
      out.data[i] = detail::clamp8(v + s * (v - blurred.data[i]));
    }
  }
  if (params.gaussian_noise) {
    Rng rng(params.gaussian_noise->seed);
    double sigma = params.gaussian_noise->sigma;
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = detail::clamp8(out.data[i] + rng.gaussian() * sigma);
  }
  if (params.brightness_contrast) {
    double b = params.brightness_contrast->brightness * 255.0;
    double k = params.brightness_contrast->contrast;
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = detail::clamp8((out.data[i] - 127.5) * k + 127.5 + b);
  }
  if (params.rgb_shift) {
    const auto& shift = *params.rgb_shift;
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = detail::clamp8(out.data[i] + shift[i % 3]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair construction
// ---------------------------------------------------------------------------

/// Builds the training pair (x1, x2, y): x1/y from geometric params, x2 from
/// photometric params applied to x1. Deterministic per (seed, config).
inline CqgPair make_cqg_pair(const RgbImage& image, const LabelMask& mask,
                             std::uint64_t seed, const AugmentConfig& config = {}) {
  CqgPair pair;
  pair.geometric = sample_geometric_params(derive_seed(seed, 0), config);
  pair.photometric = sample_photometric_params(derive_seed(seed, 1), config);
  auto [x1, y] = apply_geometric(image, mask, pair.geometric);
  pair.x2 = apply_photometric(x1, pair.photometric);
  pair.x1 = std::move(x1);
  pair.y = std::move(y);
  return pair;
}

// ---------------------------------------------------------------------------
// JSON round trip for params (augment runs record what they sampled) and
// config files.
// ---------------------------------------------------------------------------

inline nlohmann::json params_to_json(const GeometricParams& g, const PhotometricParams& p) {
  nlohmann::json jg;
  jg["hflip"] = g.hflip;
  jg["shift"] = g.shift ? nlohmann::json(*g.shift) : nlohmann::json(nullptr);
  jg["scale"] = g.scale ? nlohmann::json(*g.scale) : nlohmann::json(nullptr);
  jg["rotate_deg"] = g.rotate_deg ? nlohmann::json(*g.rotate_deg) : nlohmann::json(nullptr);
  jg["shear_deg"] = g.shear_deg ? nlohmann::json(*g.shear_deg) : nlohmann::json(nullptr);
  if (g.elastic)
    jg["elastic"] = {{"alpha", g.elastic->alpha},
                     {"sigma", g.elastic->sigma},
                     {"seed", g.elastic->seed}};
  else
    jg["elastic"] = nullptr;

  nlohmann::json jp;
  jp["blur_radius"] = p.blur_radius ? nlohmann::json(*p.blur_radius) : nlohmann::json(nullptr);
  jp["sharpen"] = p.sharpen ? nlohmann::json(*p.sharpen) : nlohmann::json(nullptr);
  if (p.gaussian_noise)
    jp["gaussian_noise"] = {{"sigma", p.gaussian_noise->sigma},
                            {"seed", p.gaussian_noise->seed}};
  else
    jp["gaussian_noise"] = nullptr;
  if (p.brightness_contrast)
    jp["brightness_contrast"] = {{"brightness", p.brightness_contrast->brightness},
                                 {"contrast", p.brightness_contrast->contrast}};
  else
    jp["brightness_contrast"] = nullptr;
  jp["rgb_shift"] = p.rgb_shift ? nlohmann::json(*p.rgb_shift) : nlohmann::json(nullptr);

  return nlohmann::json{{"geometric", jg}, {"photometric", jp}};
}

inline std::pair<GeometricParams, PhotometricParams> params_from_json(const nlohmann::json& j) {
  GeometricParams g;
  PhotometricParams p;
  try {
    const auto& jg = j.at("geometric");
    g.hflip = jg.at("hflip").get<bool>();
    if (!jg.at("shift").is_null()) g.shift = jg.at("shift").get<std::array<double, 2>>();
    if (!jg.at("scale").is_null()) g.scale = jg.at("scale").get<double>();
    if (!jg.at("rotate_deg").is_null()) g.rotate_deg = jg.at("rotate_deg").get<double>();
    if (!jg.at("shear_deg").is_null()) g.shear_deg = jg.at("shear_deg").get<double>();
    if (!jg.at("elastic").is_null()) {
      ElasticParams e;
      e.alpha = jg.at("elastic").at("alpha").get<double>();
      e.sigma = jg.at("elastic").at("sigma").get<double>();
      e.seed = jg.at("elastic").at("seed").get<std::uint64_t>();
      g.elastic = e;
    }
    const auto& jp = j.at("photometric");
    if (!jp.at("blur_radius").is_null()) p.blur_radius = jp.at("blur_radius").get<int>();
    if (!jp.at("sharpen").is_null()) p.sharpen = jp.at("sharpen").get<double>();
    if (!jp.at("gaussian_noise").is_null()) {
      NoiseParams noise;
      noise.sigma = jp.at("gaussian_noise").at("sigma").get<double>();
      noise.seed = jp.at("gaussian_noise").at("seed").get<std::uint64_t>();
      p.gaussian_noise = noise;
    }
    if (!jp.at("brightness_contrast").is_null()) {
      BrightnessContrastParams bc;
      bc.brightness = jp.at("brightness_contrast").at("brightness").get<double>();
      bc.contrast = jp.at("brightness_contrast").at("contrast").get<double>();
      p.brightness_contrast = bc;
    }
    if (!jp.at("rgb_shift").is_null())
      p.rgb_shift = jp.at("rgb_shift").get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed augmentation params: ") + e.what());
  }
  return {g, p};
}

namespace detail {

inline void read_probability(const nlohmann::json& j, const char* key, double& out) {
  out = j.at("probability").get<double>();
  if (!(out >= 0.0 && out <= 1.0))
    throw ConfigError(std::string("augment config: ") + key +
                      ".probability must be in [0,1]");
}

inline void read_range(const nlohmann::json& j, const char* key, double& lo, double& hi,
                       const char* lo_key = "min", const char* hi_key = "max") {
  lo = j.at(lo_key).get<double>();
  hi = j.at(hi_key).get<double>();
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError(std::string("augment config: ") + key + " has an empty range");
}

}  // namespace detail

/// Loads an augmentation config. Only present keys override defaults;
/// unknown keys are rejected.
inline AugmentConfig load_augment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed augment config " + path.string() + ": " + e.what());
  }

  AugmentConfig c;
  try {
    static const std::vector<std::string> kGeoKeys = {"hflip",  "shift", "scale",
                                                      "rotate", "shear", "elastic"};
    static const std::vector<std::string> kPhotoKeys = {
        "blur", "sharpen", "gaussian_noise", "brightness_contrast", "rgb_shift"};
    for (const auto& [key, val] : j.items())
      if (key != "geometric" && key != "photometric")
        throw ConfigError("augment config: unknown key '" + key + "'");

    if (j.contains("geometric")) {
      for (const auto& [key, val] : j["geometric"].items()) {
        if (std::find(kGeoKeys.begin(), kGeoKeys.end(), key) == kGeoKeys.end())
          throw ConfigError("augment config: unknown geometric key '" + key + "'");
        if (key == "hflip") detail::read_probability(val, "hflip", c.hflip.probability);
        if (key == "shift") {
          detail::read_probability(val, "shift", c.shift.probability);
          detail::read_range(val, "shift", c.shift.min, c.shift.max);
        }
        if (key == "scale") {
          detail::read_probability(val, "scale", c.scale.probability);
          detail::read_range(val, "scale", c.scale.min, c.scale.max);
          if (c.scale.min <= 0.0) throw ConfigError("augment config: scale.min must be > 0");
        }
        if (key == "rotate") {
          detail::read_probability(val, "rotate", c.rotate.probability);
          detail::read_range(val, "rotate", c.rotate.min, c.rotate.max);
        }
        if (key == "shear") {
          detail::read_probability(val, "shear", c.shear.probability);
          detail::read_range(val, "shear", c.shear.min, c.shear.max);
          if (c.shear.min <= -90.0 || c.shear.max >= 90.0)
            throw ConfigError("augment config: shear must stay within (-90,90) degrees");
        }
        if (key == "elastic") {
          detail::read_probability(val, "elastic", c.elastic.probability);
          detail::read_range(val, "elastic.alpha", c.elastic.alpha_min, c.elastic.alpha_max,
                             "alpha_min", "alpha_max");
          detail::read_range(val, "elastic.sigma", c.elastic.sigma_min, c.elastic.sigma_max,
                             "sigma_min", "sigma_max");
          if (c.elastic.sigma_min <= 0.0)
            throw ConfigError("augment config: elastic.sigma_min must be > 0");
        }
      }
    }
    if (j.contains("photometric")) {
      for (const auto& [key, val] : j["photometric"].items()) {
        if (std::find(kPhotoKeys.begin(), kPhotoKeys.end(), key) == kPhotoKeys.end())
          throw ConfigError("augment config: unknown photometric key '" + key + "'");
        if (key == "blur") {
          detail::read_probability(val, "blur", c.blur.probability);
          c.blur.radius_min = val.at("radius_min").get<int>();
          c.blur.radius_max = val.at("radius_max").get<int>();
          if (c.blur.radius_min < 1 || c.blur.radius_max < c.blur.radius_min)
            throw ConfigError("augment config: blur radius range invalid");
        }
        if (key == "sharpen") {
          detail::read_probability(val, "sharpen", c.sharpen.probability);
          detail::read_range(val, "sharpen", c.sharpen.min, c.sharpen.max);
        }
        if (key == "gaussian_noise") {
          detail::read_probability(val, "gaussian_noise", c.gaussian_noise.probability);
          detail::read_range(val, "gaussian_noise", c.gaussian_noise.min,
                             c.gaussian_noise.max, "sigma_min", "sigma_max");
          if (c.gaussian_noise.min < 0.0)
            throw ConfigError("augment config: noise sigma must be >= 0");
        }
        if (key == "brightness_contrast") {
          detail::read_probability(val, "brightness_contrast",
                                   c.brightness_contrast.probability);
          detail::read_range(val, "brightness", c.brightness_contrast.brightness_min,
                             c.brightness_contrast.brightness_max, "brightness_min",
                             "brightness_max");
          detail::read_range(val, "contrast", c.brightness_contrast.contrast_min,
                             c.brightness_contrast.contrast_max, "contrast_min",
                             "contrast_max");
        }
        if (key == "rgb_shift") {
          detail::read_probability(val, "rgb_shift", c.rgb_shift.probability);
          detail::read_range(val, "rgb_shift", c.rgb_shift.min, c.rgb_shift.max);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("augment config " + path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace dcin
