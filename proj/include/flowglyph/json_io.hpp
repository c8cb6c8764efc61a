#pragma once

#include <string>
#include <vector>

#include "flowglyph/cnn/trainer.hpp"
#include "flowglyph/features.hpp"
#include "flowglyph/synth.hpp"
#include "json.hpp"

namespace flowglyph {

using Json = nlohmann::ordered_json;

Json to_json(const Session& s);
Json to_json(const Triplet& t);
Json to_json(const FeatureSet& fs);
FeatureSet feature_set_from_json(const Json& j);

Json to_json(const ClassProfile& p);
/// Fields missing from `j` keep the values of `base`.
ClassProfile profile_from_json(const Json& j, const ClassProfile& base);

/// Accepts {"groups_per_class", "seed", "output_dir", "profiles"}, where each
/// profile is either a default profile name or an object whose "name" selects
/// the defaults it overrides.
DatasetSpec dataset_spec_from_json(const Json& j);

Json to_json(const cnn::TrainConfig& c);

/// Parses a whole file as one JSON document. Throws Error{IoFailure} if the
/// file is unreadable and Error{MalformedInput} if it is not JSON.
Json read_json_file(const std::string& path);

/// One JSON value per non-empty line.
std::vector<Json> read_json_lines(const std::string& path);
void write_json_lines(const std::string& path, const std::vector<Json>& lines);

}  // namespace flowglyph
