#include "edip/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace edip {

using nlohmann::json;  // std::map-backed, so dumps with sorted keys

namespace {

constexpr double kPi = 3.14159265358979323846;

json lr_to_json(const LrSection& s) {
    return {{"kind", s.kind}, {"initial", s.initial}, {"final", s.final},
            {"transition", s.transition}};
}

LrSection lr_from_json(const json& j) {
    LrSection s;
    s.kind = j.at("kind").get<std::string>();
    s.initial = j.at("initial").get<double>();
    s.final = j.at("final").get<double>();
    s.transition = j.at("transition").get<int64_t>();
    return s;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["version"] = c.version;
    j["geometry"] = {{"image_size", c.geometry.image_size},
                     {"num_angles", c.geometry.num_angles},
                     {"angle_start_deg", c.geometry.angle_start_deg},
                     {"angle_span_deg", c.geometry.angle_span_deg},
                     {"num_detector_pixels", c.geometry.num_detector_pixels},
                     {"detector_extent", c.geometry.detector_extent},
                     {"source_radius", c.geometry.source_radius},
                     {"detector_radius", c.geometry.detector_radius}};
    j["dataset"] = {{"count_min", c.dataset.count_min},
                    {"count_max", c.dataset.count_max},
                    {"value_min", c.dataset.value_min},
                    {"value_max", c.dataset.value_max},
                    {"axis_min", c.dataset.axis_min},
                    {"axis_max", c.dataset.axis_max},
                    {"center_disk_radius", c.dataset.center_disk_radius}};
    j["noise"] = {{"relative_stddev", c.noise.relative_stddev}};
    j["unet"] = {{"scales", c.unet.scales},
                 {"channels", c.unet.channels},
                 {"skip_channels", c.unet.skip_channels},
                 {"kernel_size", c.unet.kernel_size},
                 {"groups", c.unet.groups}};
    j["pretrain"] = {{"epochs", c.pretrain.epochs},
                     {"samples_per_epoch", c.pretrain.samples_per_epoch},
                     {"val_samples", c.pretrain.val_samples},
                     {"batch_size", c.pretrain.batch_size},
                     {"lr", c.pretrain.lr},
                     {"checkpoint_every_epochs", c.pretrain.checkpoint_every_epochs},
                     {"num_runs", c.pretrain.num_runs}};
    j["select"] = {{"gamma_prime", c.select.gamma_prime},
                   {"lr", lr_to_json(c.select.lr)},
                   {"max_iters", c.select.max_iters},
                   {"eval_every", c.select.eval_every}};
    json methods = json::array();
    for (const auto& m : c.methods) {
        methods.push_back({{"name", m.name},
                           {"input", m.input},
                           {"pretrained", m.pretrained},
                           {"freeze_encoder", m.freeze_encoder},
                           {"gamma_prime", m.gamma_prime},
                           {"lr", lr_to_json(m.lr)},
                           {"max_iters", m.max_iters},
                           {"eval_every", m.eval_every},
                           {"use_stop_rule", m.use_stop_rule},
                           {"stop_window", m.stop_window},
                           {"stop_threshold", m.stop_threshold}});
    }
    j["methods"] = methods;
    j["metrics"] = {{"tail_fraction", c.metrics.tail_fraction},
                    {"rise_margin_db", c.metrics.rise_margin_db},
                    {"selection_margin_db", c.metrics.selection_margin_db}};
    j["spectra"] = {{"rank", c.spectra.rank},
                    {"oversampling", c.spectra.oversampling},
                    {"method", c.spectra.method},
                    {"mid_iter", c.spectra.mid_iter}};
    j["test_phantom"] = c.test_phantom;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    c.version = j.at("version").get<int>();
    if (c.version != 1)
        throw Error("config: unsupported version " + std::to_string(c.version));
    {
        const json& g = j.at("geometry");
        c.geometry.image_size = g.at("image_size").get<int64_t>();
        c.geometry.num_angles = g.at("num_angles").get<int64_t>();
        c.geometry.angle_start_deg = g.at("angle_start_deg").get<double>();
        c.geometry.angle_span_deg = g.at("angle_span_deg").get<double>();
        c.geometry.num_detector_pixels = g.at("num_detector_pixels").get<int64_t>();
        c.geometry.detector_extent = g.at("detector_extent").get<double>();
        c.geometry.source_radius = g.at("source_radius").get<double>();
        c.geometry.detector_radius = g.at("detector_radius").get<double>();
    }
    {
        const json& d = j.at("dataset");
        c.dataset.count_min = d.at("count_min").get<int>();
        c.dataset.count_max = d.at("count_max").get<int>();
        c.dataset.value_min = d.at("value_min").get<double>();
        c.dataset.value_max = d.at("value_max").get<double>();
        c.dataset.axis_min = d.at("axis_min").get<double>();
        c.dataset.axis_max = d.at("axis_max").get<double>();
        c.dataset.center_disk_radius = d.at("center_disk_radius").get<double>();
    }
    c.noise.relative_stddev = j.at("noise").at("relative_stddev").get<double>();
    {
        const json& u = j.at("unet");
        c.unet.scales = u.at("scales").get<int>();
        c.unet.channels = u.at("channels").get<int>();
        c.unet.skip_channels = u.at("skip_channels").get<int>();
        c.unet.kernel_size = u.at("kernel_size").get<int>();
        c.unet.groups = u.at("groups").get<int>();
    }
    {
        const json& p = j.at("pretrain");
        c.pretrain.epochs = p.at("epochs").get<int64_t>();
        c.pretrain.samples_per_epoch = p.at("samples_per_epoch").get<int64_t>();
        c.pretrain.val_samples = p.at("val_samples").get<int64_t>();
        c.pretrain.batch_size = p.at("batch_size").get<int64_t>();
        c.pretrain.lr = p.at("lr").get<double>();
        c.pretrain.checkpoint_every_epochs = p.at("checkpoint_every_epochs").get<int64_t>();
        c.pretrain.num_runs = p.at("num_runs").get<int>();
    }
    {
        const json& s = j.at("select");
        c.select.gamma_prime = s.at("gamma_prime").get<double>();
        c.select.lr = lr_from_json(s.at("lr"));
        c.select.max_iters = s.at("max_iters").get<int64_t>();
        c.select.eval_every = s.at("eval_every").get<int>();
    }
    c.methods.clear();
    for (const json& mj : j.at("methods")) {
        MethodSection m;
        m.name = mj.at("name").get<std::string>();
        m.input = mj.at("input").get<std::string>();
        m.pretrained = mj.at("pretrained").get<bool>();
        m.freeze_encoder = mj.at("freeze_encoder").get<bool>();
        m.gamma_prime = mj.at("gamma_prime").get<double>();
        m.lr = lr_from_json(mj.at("lr"));
        m.max_iters = mj.at("max_iters").get<int64_t>();
        m.eval_every = mj.at("eval_every").get<int>();
        m.use_stop_rule = mj.at("use_stop_rule").get<bool>();
        m.stop_window = mj.at("stop_window").get<int>();
        m.stop_threshold = mj.at("stop_threshold").get<double>();
        c.methods.push_back(std::move(m));
    }
    {
        const json& m = j.at("metrics");
        c.metrics.tail_fraction = m.at("tail_fraction").get<double>();
        c.metrics.rise_margin_db = m.at("rise_margin_db").get<double>();
        c.metrics.selection_margin_db = m.at("selection_margin_db").get<double>();
    }
    {
        const json& s = j.at("spectra");
        c.spectra.rank = s.at("rank").get<int>();
        c.spectra.oversampling = s.at("oversampling").get<int>();
        c.spectra.method = s.at("method").get<std::string>();
        c.spectra.mid_iter = s.at("mid_iter").get<int64_t>();
    }
    c.test_phantom = j.at("test_phantom").get<std::string>();
    c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    c.output_dir = j.at("output_dir").get<std::string>();
    return c;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

FanBeamGeometry GeometryConfig::build() const {
    FanBeamGeometry g;
    g.image_size = image_size;
    g.angles = FanBeamGeometry::uniform_angles(num_angles, angle_start_deg * kPi / 180.0,
                                               angle_span_deg * kPi / 180.0);
    g.source_radius = source_radius;
    g.detector_radius = detector_radius;
    g.num_detector_pixels = num_detector_pixels;
    g.detector_extent = detector_extent;
    g.validate();
    return g;
}

LearningRateSchedule LrSection::build() const {
    if (kind == "constant") return LearningRateSchedule::constant(initial);
    if (kind == "linear-warmdown")
        return LearningRateSchedule::linear_warmdown(initial, final, transition);
    throw Error("config: unknown lr schedule kind '" + kind + "'");
}

void ExperimentConfig::validate() const {
    geometry.build();
    dataset.validate();
    unet.validate();
    if (noise.relative_stddev < 0) throw Error("config: noise stddev must be non-negative");
    if (seeds.empty()) throw Error("config: seeds must be non-empty");
    if (pretrain.num_runs < 1) throw Error("config: pretrain num_runs must be positive");
    if (test_phantom != "rings-and-texture" && test_phantom != "voronoi-cells" &&
        test_phantom != "shepp-logan" && test_phantom != "ellipses")
        throw Error("config: unknown test_phantom '" + test_phantom + "'");
    for (const auto& m : methods) {
        if (m.input != "noise" && m.input != "fbp")
            throw Error("config: method '" + m.name + "' has unknown input mode '" + m.input + "'");
        if (m.freeze_encoder && !m.pretrained)
            throw Error("config: method '" + m.name + "' freezes the encoder without pretraining");
        m.lr.build();
        if (m.max_iters < 1 || m.eval_every < 1)
            throw Error("config: method '" + m.name + "' has non-positive iteration counts");
    }
    if (spectra.rank < 1 || spectra.oversampling < 0)
        throw Error("config: spectra rank/oversampling invalid");
}

std::string ExperimentConfig::canonical_json() const { return to_json(*this).dump(2) + "\n"; }

uint64_t ExperimentConfig::hash() const {
    json j = to_json(*this);
    j.erase("seeds");
    j.erase("output_dir");
    return fnv1a(j.dump());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("config: parse error: ") + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    ExperimentConfig c = from_json_text(ss.str());
    c.validate();
    return c;
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << canonical_json();
    if (!f) throw IoError("write failed: " + path);
}

const MethodSection* ExperimentConfig::find_method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.name == name) return &m;
    return nullptr;
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    MethodSection dip;
    dip.name = "dip-noise";
    dip.input = "noise";
    dip.max_iters = 3000;
    c.methods.push_back(dip);

    MethodSection edip;
    edip.name = "edip-fbp";
    edip.input = "fbp";
    edip.pretrained = true;
    edip.max_iters = 1500;
    c.methods.push_back(edip);

    MethodSection fe = edip;
    fe.name = "edip-fbp-fe";
    fe.freeze_encoder = true;
    c.methods.push_back(fe);
    return c;
}

}  // namespace edip
