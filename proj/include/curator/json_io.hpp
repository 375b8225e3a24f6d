#pragma once

// nlohmann::json conversions for domain types. Boxes serialize as
// [x_min, y_min, x_max, y_max]; vectors as plain arrays.

#include <json.hpp>

#include "curator/backends.hpp"
#include "curator/embedding.hpp"
#include "curator/geometry.hpp"

namespace curator {

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

void to_json(nlohmann::json& j, const ImageDims& d);
void from_json(const nlohmann::json& j, ImageDims& d);

void to_json(nlohmann::json& j, const RoiSpec& s);
void from_json(const nlohmann::json& j, RoiSpec& s);

void to_json(nlohmann::json& j, const EmbeddingVector& v);
void from_json(const nlohmann::json& j, EmbeddingVector& v);

void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);

void to_json(nlohmann::json& j, const BackendEndpoint& e);
void from_json(const nlohmann::json& j, BackendEndpoint& e);

void to_json(nlohmann::json& j, const BackendSpec& s);
void from_json(const nlohmann::json& j, BackendSpec& s);

void to_json(nlohmann::json& j, const BackendsConfig& c);
void from_json(const nlohmann::json& j, BackendsConfig& c);

}  // namespace curator
