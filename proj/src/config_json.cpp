#include "feasc/config_json.hpp"

#include <algorithm>

namespace feasc {

void require_known_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) throw ValidationError("unknown key '" + item.key() + "' in " + where);
  }
}

Json to_json(const EncoderSpec& s) {
  return {{"architecture", s.architecture}, {"in_channels", s.in_channels}, {"widths", s.widths}, {"strides", s.strides}};
}

Json to_json(const HeadSpec& s) {
  return {{"projector_hidden", s.projector_hidden}, {"embedding_dim", s.embedding_dim}, {"predictor_hidden", s.predictor_hidden}};
}

Json to_json(const AugmentPolicy& p) {
  return {{"crop_scale_min", p.crop_scale_min}, {"crop_scale_max", p.crop_scale_max},
          {"crop_ratio_min", p.crop_ratio_min}, {"crop_ratio_max", p.crop_ratio_max},
          {"flip_p", p.flip_p},                 {"jitter_p", p.jitter_p},
          {"brightness", p.brightness},         {"contrast", p.contrast},
          {"saturation", p.saturation},         {"hue", p.hue},
          {"grayscale_p", p.grayscale_p},       {"blur_p", p.blur_p},
          {"blur_sigma_min", p.blur_sigma_min}, {"blur_sigma_max", p.blur_sigma_max},
          {"resolution", p.resolution}};
}

void from_json_strict(const Json& j, EncoderSpec& s) {
  require_known_keys(j, {"architecture", "in_channels", "widths", "strides"}, "encoder");
  read_field(j, "architecture", s.architecture, "encoder");
  read_field(j, "in_channels", s.in_channels, "encoder");
  read_field(j, "widths", s.widths, "encoder");
  read_field(j, "strides", s.strides, "encoder");
  s.validate();
}

void from_json_strict(const Json& j, HeadSpec& s) {
  require_known_keys(j, {"projector_hidden", "embedding_dim", "predictor_hidden"}, "head");
  read_field(j, "projector_hidden", s.projector_hidden, "head");
  read_field(j, "embedding_dim", s.embedding_dim, "head");
  read_field(j, "predictor_hidden", s.predictor_hidden, "head");
  s.validate();
}

void from_json_strict(const Json& j, AugmentPolicy& p) {
  require_known_keys(j,
                     {"crop_scale_min", "crop_scale_max", "crop_ratio_min", "crop_ratio_max", "flip_p", "jitter_p",
                      "brightness", "contrast", "saturation", "hue", "grayscale_p", "blur_p", "blur_sigma_min",
                      "blur_sigma_max", "resolution"},
                     "augment");
  const std::string w = "augment";
  read_field(j, "crop_scale_min", p.crop_scale_min, w);
  read_field(j, "crop_scale_max", p.crop_scale_max, w);
  read_field(j, "crop_ratio_min", p.crop_ratio_min, w);
  read_field(j, "crop_ratio_max", p.crop_ratio_max, w);
  read_field(j, "flip_p", p.flip_p, w);
  read_field(j, "jitter_p", p.jitter_p, w);
  read_field(j, "brightness", p.brightness, w);
  read_field(j, "contrast", p.contrast, w);
  read_field(j, "saturation", p.saturation, w);
  read_field(j, "hue", p.hue, w);
  read_field(j, "grayscale_p", p.grayscale_p, w);
  read_field(j, "blur_p", p.blur_p, w);
  read_field(j, "blur_sigma_min", p.blur_sigma_min, w);
  read_field(j, "blur_sigma_max", p.blur_sigma_max, w);
  read_field(j, "resolution", p.resolution, w);
  p.validate();
}

}  // namespace feasc
