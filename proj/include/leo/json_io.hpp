#pragma once

// nlohmann::json bindings for configuration and data types.

#include <json.hpp>

#include "leo/channel_model.hpp"
#include "leo/complex_linalg.hpp"

namespace leo {

using Json = nlohmann::json;

void to_json(Json& j, const ArrayGeometry& g);
void from_json(const Json& j, ArrayGeometry& g);
void to_json(Json& j, const GammaSpec& g);
void from_json(const Json& j, GammaSpec& g);
void to_json(Json& j, const FadingSpec& f);
void from_json(const Json& j, FadingSpec& f);
void to_json(Json& j, const ChannelDistributionSpec& d);
void from_json(const Json& j, ChannelDistributionSpec& d);
void to_json(Json& j, const ChannelSet& cs);
void from_json(const Json& j, ChannelSet& cs);

/// Complex vector as {"re": [...], "im": [...]}.
Json complex_to_json(std::span<const cplx> values);
std::vector<cplx> complex_from_json(const Json& j);

/// Doubles round-trip exactly through nlohmann's shortest representation, but
/// +-inf does not survive JSON; these map it to the strings "inf"/"-inf".
Json real_to_json(double x);
double real_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace leo
