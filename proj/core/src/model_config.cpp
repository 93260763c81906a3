#include "manner/model_config.hpp"

#include <cmath>
#include <sstream>

#include "manner/errors.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {
namespace {

long long parse_int(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError("model." + key + ": expected an integer, got '" + text + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError("model." + key + ": expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("model." + key + ": expected true/false, got '" + text + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::kFull ? "full" : "small"; }

Variant parse_variant(const std::string& text) {
  if (text == "full") return Variant::kFull;
  if (text == "small") return Variant::kSmall;
  throw ConfigError("variant must be 'full' or 'small', got '" + text + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (depth < 1) fail("depth must be >= 1");
  if (stride < 1) fail("stride must be >= 1");
  if (kernel <= stride) fail("kernel must exceed stride (K > S)");
  if ((kernel - stride) % 2 != 0) fail("kernel - stride must be even for symmetric padding");
  if (channels < 6 || channels % 6 != 0) fail("channels must be a positive multiple of 6");
  if (growth_inner < 1) fail("growth_inner must be >= 1");
  if (growth_encoder < 1) fail("growth_encoder must be >= 1");
  if (std::abs(growth_decoder * growth_encoder - 1.0) > 1e-12) fail("growth_decoder must equal 1/growth_encoder");
  if (rescon_kernel < 1 || rescon_kernel % 2 == 0) fail("rescon_kernel must be odd");
  if (input_kernel < 1 || input_kernel % 2 == 0) fail("input_kernel must be odd");
  if (chunk_size < 2 || chunk_size % 2 != 0) fail("chunk_size must be even");
  if (attention.local && chunk_size % 4 != 0) fail("local attention needs chunk_size divisible by 4");
  for (int l = 0; l <= depth; ++l) {
    if (encoder_channels(l) % 6 != 0) fail("channels at layer " + std::to_string(l) + " not divisible by 6");
  }
  if (length_unit() > (std::int64_t{1} << 40)) fail("stride^depth too large");
}

std::int64_t ModelConfig::encoder_channels(int layer) const {
  std::int64_t c = channels;
  for (int l = 0; l < layer; ++l) c *= growth_encoder;
  return c;
}

std::int64_t ModelConfig::length_unit() const {
  std::int64_t u = 1;
  for (int l = 0; l < depth; ++l) u *= stride;
  return u;
}

std::int64_t ModelConfig::padded_length(std::int64_t length) const {
  const auto unit = length_unit();
  return ((length + unit - 1) / unit) * unit;
}

bool ModelConfig::has_attention(int layer) const {
  if (attention.count() == 0) return false;
  return variant == Variant::kFull || layer == depth;
}

std::map<std::string, std::string> ModelConfig::to_entries() const {
  return {
      {"kernel", std::to_string(kernel)},
      {"stride", std::to_string(stride)},
      {"channels", std::to_string(channels)},
      {"depth", std::to_string(depth)},
      {"chunk_size", std::to_string(chunk_size)},
      {"variant", to_string(variant)},
      {"growth_inner", std::to_string(growth_inner)},
      {"growth_encoder", std::to_string(growth_encoder)},
      {"growth_decoder", format_double(growth_decoder)},
      {"rescon_kernel", std::to_string(rescon_kernel)},
      {"input_kernel", std::to_string(input_kernel)},
      {"channel_attention", attention.channel ? "true" : "false"},
      {"global_attention", attention.global ? "true" : "false"},
      {"local_attention", attention.local ? "true" : "false"},
  };
}

ModelConfig ModelConfig::from_entries(const std::map<std::string, std::string>& entries) {
  ModelConfig c;
  for (const auto& [key, value] : entries) {
    if (key == "kernel") c.kernel = static_cast<int>(parse_int(key, value));
    else if (key == "stride") c.stride = static_cast<int>(parse_int(key, value));
    else if (key == "channels") c.channels = parse_int(key, value);
    else if (key == "depth") c.depth = static_cast<int>(parse_int(key, value));
    else if (key == "chunk_size") c.chunk_size = parse_int(key, value);
    else if (key == "variant") c.variant = parse_variant(value);
    else if (key == "growth_inner") c.growth_inner = static_cast<int>(parse_int(key, value));
    else if (key == "growth_encoder") c.growth_encoder = static_cast<int>(parse_int(key, value));
    else if (key == "growth_decoder") c.growth_decoder = parse_double(key, value);
    else if (key == "rescon_kernel") c.rescon_kernel = static_cast<int>(parse_int(key, value));
    else if (key == "input_kernel") c.input_kernel = static_cast<int>(parse_int(key, value));
    else if (key == "channel_attention") c.attention.channel = parse_bool(key, value);
    else if (key == "global_attention") c.attention.global = parse_bool(key, value);
    else if (key == "local_attention") c.attention.local = parse_bool(key, value);
    else throw ConfigError("unknown model key '" + key + "'");
  }
  return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const { return to_entries() == o.to_entries(); }

}  // namespace MANNER_ABI_NS
}  // namespace manner
