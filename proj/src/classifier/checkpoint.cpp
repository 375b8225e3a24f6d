#include "curator/classifier/checkpoint.hpp"

#include <fstream>

#include "curator/errors.hpp"
#include "curator/image_store.hpp"

namespace curator {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "curator.preference-model";
}

void to_json(json& j, const ModelDims& d) {
    j = {{"global_dim", d.global_dim},
         {"spatial_dim", d.spatial_dim},
         {"gate_hidden_global", d.gate_hidden_global},
         {"gate_hidden_spatial", d.gate_hidden_spatial},
         {"fusion_input_dim", d.fusion_input_dim},
         {"fusion_dim", d.fusion_dim},
         {"head_hidden1", d.head_hidden1},
         {"head_hidden2", d.head_hidden2},
         {"gate_init_open", d.gate_init_open}};
}

void from_json(const json& j, ModelDims& d) {
    d.global_dim = j.at("global_dim").get<int>();
    d.spatial_dim = j.at("spatial_dim").get<int>();
    d.gate_hidden_global = j.at("gate_hidden_global").get<int>();
    d.gate_hidden_spatial = j.at("gate_hidden_spatial").get<int>();
    d.fusion_input_dim = j.at("fusion_input_dim").get<int>();
    d.fusion_dim = j.at("fusion_dim").get<int>();
    d.head_hidden1 = j.at("head_hidden1").get<int>();
    d.head_hidden2 = j.at("head_hidden2").get<int>();
    d.gate_init_open = j.at("gate_init_open").get<double>();
    validate(d);
}

json checkpoint_json(const Checkpoint& c) {
    json blocks = json::array();
    for (const ParamBlock& b : c.model.layout()) {
        const auto values = c.model.params().subspan(b.offset, b.size());
        blocks.push_back({{"name", b.name},
                          {"rows", b.rows},
                          {"cols", b.cols},
                          {"values", std::vector<double>(values.begin(), values.end())}});
    }
    return {{"format", kFormat},
            {"version", kCheckpointVersion},
            {"dims", c.model.dims()},
            {"seed", c.model.seed()},
            {"train_config", c.train_config},
            {"blocks", blocks}};
}

Checkpoint checkpoint_from_json(const json& j) {
    if (j.value("format", std::string()) != kFormat)
        throw FormatError("not a preference-model checkpoint");
    const int version = j.value("version", -1);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    const ModelDims dims = j.at("dims").get<ModelDims>();
    const auto layout = param_layout(dims);
    const json& blocks = j.at("blocks");
    if (blocks.size() != layout.size()) throw FormatError("checkpoint block count mismatch");

    std::vector<double> params;
    params.reserve(layout.back().offset + layout.back().size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const json& b = blocks[i];
        if (b.at("name").get<std::string>() != layout[i].name || b.at("rows").get<int>() != layout[i].rows ||
            b.at("cols").get<int>() != layout[i].cols)
            throw FormatError("checkpoint block " + std::to_string(i) + " does not match the model layout");
        const auto values = b.at("values").get<std::vector<double>>();
        if (values.size() != layout[i].size())
            throw FormatError("checkpoint block " + layout[i].name + " has the wrong length");
        params.insert(params.end(), values.begin(), values.end());
    }
    return {PreferenceModel(dims, j.at("seed").get<std::uint64_t>(), std::move(params)),
            j.at("train_config").get<TrainConfig>()};
}

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) {
    write_text_atomic(p, checkpoint_json(c).dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open checkpoint " + p.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint " + p.string() + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace curator
