#include "curator/mock_backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "curator/errors.hpp"
#include "curator/hashing.hpp"
#include "curator/json_io.hpp"

namespace curator {

using nlohmann::json;

namespace {

std::string box_key(const Box& b) {
    // Rounded to 1/1000 px so float noise in crops cannot change the output.
    auto r = [](double v) { return std::to_string(std::llround(v * 1000.0)); };
    return r(b.x_min) + "," + r(b.y_min) + "," + r(b.x_max) + "," + r(b.y_max);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<double> gaussian_vector(std::uint64_t key, int dim) {
    HashStream hs(key);
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = hs.normal();
    return v;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void check_crop_inside(const ImageStore& store, const std::string& image_id, const Box& crop) {
    validate(crop);
    const ImageDims d = store.dims(image_id);
    if (!d.bounds().contains(crop))
        throw ValidationError("crop " + json(crop).dump() + " outside image " + image_id + " (" +
                              std::to_string(d.width) + "x" + std::to_string(d.height) + ")");
}

// ---------------------------------------------------------------- hash mocks

HashInpainter::HashInpainter(std::shared_ptr<ImageStore> store, std::uint64_t seed)
    : store_(std::move(store)), seed_(seed) {}

std::string HashInpainter::inpaint(const std::string& background_id, const std::string& prompt,
                                   const Box& mask, std::uint64_t seed) const {
    const ImageDims d = store_->dims(background_id);
    validate(mask);
    if (!d.bounds().contains(mask))
        throw ValidationError("mask " + json(mask).dump() + " outside background " + background_id);

    const std::uint64_t key = stable_hash(
        {background_id, prompt, box_key(mask), std::to_string(seed), std::to_string(seed_)});
    const std::uint64_t obj = mix64(key);
    const unsigned char base[3] = {static_cast<unsigned char>(key), static_cast<unsigned char>(key >> 8),
                                   static_cast<unsigned char>(key >> 16)};
    const unsigned char paint[3] = {static_cast<unsigned char>(obj), static_cast<unsigned char>(obj >> 8),
                                    static_cast<unsigned char>(obj >> 16)};

    const auto x0 = static_cast<int>(std::floor(mask.x_min));
    const auto y0 = static_cast<int>(std::floor(mask.y_min));
    const auto x1 = std::min(d.width, static_cast<int>(std::ceil(mask.x_max)));
    const auto y1 = std::min(d.height, static_cast<int>(std::ceil(mask.y_max)));

    Bytes rgb(static_cast<std::size_t>(d.width) * d.height * 3);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            const bool inside = x >= x0 && x < x1 && y >= y0 && y < y1;
            const unsigned char* c = inside ? paint : base;
            const std::size_t at = (static_cast<std::size_t>(y) * d.width + x) * 3;
            rgb[at] = c[0];
            rgb[at + 1] = c[1];
            rgb[at + 2] = c[2];
        }
    }
    const json provenance = {{"source", "inpaint"}, {"background_id", background_id},
                             {"prompt", prompt},    {"mask", mask},
                             {"seed", seed},        {"backend", id()}};
    return store_->put(encode_png_rgb(d.width, d.height, rgb), provenance);
}

HashDetector::HashDetector(std::shared_ptr<ImageStore> store, std::uint64_t seed)
    : store_(std::move(store)), seed_(seed) {}

std::vector<Detection> HashDetector::detect(const std::string& image_id,
                                            const std::string& target_class) const {
    const json meta = store_->metadata(image_id);
    if (!meta.contains("provenance") || !meta["provenance"].contains("mask")) return {};
    const json& prov = meta["provenance"];
    if (lower(prov.value("prompt", "")).find(lower(target_class)) == std::string::npos) return {};

    HashStream hs(stable_hash({image_id, target_class, std::to_string(seed_)}));
    if (hs.uniform() < 0.08) return {};

    const Box mask = prov["mask"].get<Box>();
    const ImageDims d{meta.at("width").get<int>(), meta.at("height").get<int>()};
    const double jitter = 0.12 * hs.uniform();
    auto shift = [&](double side) { return hs.normal() * jitter * side; };
    Box b{mask.x_min + shift(mask.width()), mask.y_min + shift(mask.height()),
          mask.x_max + shift(mask.width()), mask.y_max + shift(mask.height())};
    b = {std::clamp(b.x_min, 0.0, double(d.width)), std::clamp(b.y_min, 0.0, double(d.height)),
         std::clamp(b.x_max, 0.0, double(d.width)), std::clamp(b.y_max, 0.0, double(d.height))};
    if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
    if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);

    std::vector<Detection> out;
    const double conf = 0.55 + 0.45 * hs.uniform();
    out.push_back({target_class, conf, b});
    if (hs.uniform() < 0.3) {
        // A weaker spurious hit somewhere else in the frame.
        const double w = 0.1 * d.width;
        const double h = 0.1 * d.height;
        const double x = hs.uniform() * (d.width - w);
        const double y = hs.uniform() * (d.height - h);
        out.push_back({target_class, conf * 0.6, {x, y, x + w, y + h}});
    }
    return normalize_detections(std::move(out));
}

double HashAestheticScorer::score(const std::string& image_id) const {
    return 3.5 + 4.0 * unit_interval(stable_hash({"aesthetic", image_id, std::to_string(seed_)}));
}

std::string HashCaptioner::caption(const std::string& image_id, const std::string& prompt) const {
    static const char* const scenes[] = {
        "an empty elevator with closed metal doors",
        "a blurry frame of a hallway under fluorescent light",
        "a grey concrete floor seen from above",
        "a person holding a bag near a wall",
    };
    HashStream hs(stable_hash({"caption", image_id, std::to_string(seed_)}));
    if (hs.uniform() < 0.8) return "a photo of " + prompt;
    return scenes[hs.next() % std::size(scenes)];
}

HashTextEmbedder::HashTextEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ConfigError("embedding dim must be positive");
}

EmbeddingVector HashTextEmbedder::embed(const std::string& text) const {
    if (text.empty() || is_blank(text)) throw ValidationError("cannot embed empty text");
    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    const std::string seed = std::to_string(seed_);
    for (const std::string& tok : tokenize(text)) {
        const auto v = gaussian_vector(stable_hash({"tok", tok, seed}), dim_);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    const auto whole = gaussian_vector(stable_hash({"text", text, seed}), dim_);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += 0.05 * whole[i];
    return EmbeddingVector(std::move(acc));
}

HashFeatureExtractor::HashFeatureExtractor(std::shared_ptr<ImageStore> store, int global_dim,
                                           int spatial_dim, std::uint64_t seed)
    : store_(std::move(store)), global_dim_(global_dim), spatial_dim_(spatial_dim), seed_(seed) {
    if (global_dim < 1 || spatial_dim < 1) throw ConfigError("feature dims must be positive");
}

FeatureBundle HashFeatureExtractor::extract(const std::string& image_id, const Box& crop) const {
    check_crop_inside(*store_, image_id, crop);
    const std::string k = box_key(crop);
    const std::string s = std::to_string(seed_);
    return {EmbeddingVector(gaussian_vector(stable_hash({"global", image_id, k, s}), global_dim_)),
            EmbeddingVector(gaussian_vector(stable_hash({"spatial", image_id, k, s}), spatial_dim_)),
            "mock-hash/global", "mock-hash/spatial"};
}

// ------------------------------------------------------------ scripted mocks

Fixture::Fixture(json doc) : doc_(std::move(doc)) {
    if (!doc_.is_object()) throw ValidationError("fixture must be a JSON object");
}

std::shared_ptr<const Fixture> Fixture::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixture " + path.string());
    return std::make_shared<const Fixture>(json::parse(in));
}

const json& Fixture::lookup(const std::string& section, const std::string& key) const {
    const auto sec = doc_.find(section);
    if (sec == doc_.end()) throw FixtureMissError("fixture has no '" + section + "' section");
    const auto it = sec->find(key);
    if (it == sec->end()) throw FixtureMissError("fixture miss: " + section + "[" + key + "]");
    return *it;
}

std::string ScriptedInpainter::inpaint(const std::string& background_id, const std::string&,
                                       const Box& mask, std::uint64_t seed) const {
    validate(mask);
    check_crop_inside(*store_, background_id, mask);
    const std::string image_id =
        fx_->lookup("inpaint", background_id + "|" + std::to_string(seed)).get<std::string>();
    if (!store_->contains(image_id))
        throw FixtureMissError("fixture image " + image_id + " is not in the image store");
    return image_id;
}

std::vector<Detection> ScriptedDetector::detect(const std::string& image_id,
                                                const std::string& target_class) const {
    std::vector<Detection> all = fx_->lookup("detect", image_id + "|" + target_class)
                                     .get<std::vector<Detection>>();
    std::erase_if(all, [&](const Detection& d) { return d.class_label != target_class; });
    return normalize_detections(std::move(all));
}

double ScriptedAestheticScorer::score(const std::string& image_id) const {
    return fx_->lookup("aesthetic", image_id).get<double>();
}

std::string ScriptedCaptioner::caption(const std::string& image_id, const std::string&) const {
    std::string c = fx_->lookup("caption", image_id).get<std::string>();
    if (is_blank(c)) throw ApplicationError("captioner returned an empty caption for " + image_id);
    return c;
}

EmbeddingVector ScriptedTextEmbedder::embed(const std::string& text) const {
    if (text.empty() || is_blank(text)) throw ValidationError("cannot embed empty text");
    return fx_->lookup("embed", text).get<EmbeddingVector>();
}

FeatureBundle ScriptedFeatureExtractor::extract(const std::string& image_id, const Box& crop) const {
    if (store_) check_crop_inside(*store_, image_id, crop);
    const json& entry = fx_->lookup("features", image_id);
    return {entry.at("global").get<EmbeddingVector>(), entry.at("spatial").get<EmbeddingVector>(),
            "mock-scripted/global", "mock-scripted/spatial"};
}

}  // namespace curator
