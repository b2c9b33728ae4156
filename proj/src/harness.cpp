#include "edip/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "edip/csv.hpp"
#include "edip/dip.hpp"
#include "edip/image_io.hpp"
#include "edip/plot.hpp"
#include "edip/rng.hpp"
#include "edip/serialize.hpp"
#include "edip/spectral.hpp"

namespace fs = std::filesystem;

namespace edip {

namespace {

std::string hex16(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void require_file(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw Error("missing artifact " + path + "; run `edip " + producer + "` first");
}

std::vector<double> load_flat(const std::string& path) { return load_tensor(path).data(); }

void save_image(const std::string& stem, std::span<const double> image, int64_t n) {
    save_tensor(stem + ".edipt",
                Tensor::from_data({n, n}, std::vector<double>(image.begin(), image.end())));
    write_png_gray(stem + ".png", image, n, n);
}

std::vector<double> build_test_phantom(const ExperimentConfig& cfg, uint64_t config_hash) {
    const int64_t n = cfg.geometry.image_size;
    if (cfg.test_phantom == "shepp-logan") return shepp_logan(n);
    if (cfg.test_phantom == "ellipses")
        return generate_ellipses_image(cfg.dataset, n, mix64(config_hash ^ 0x7068616e746f6dULL));
    return test_phantom(cfg.test_phantom, n);
}

DipConfig method_dip_config(const MethodSection& m, uint64_t seed,
                            const std::optional<std::string>& checkpoint) {
    DipConfig dc;
    dc.input_mode = m.input == "fbp" ? InputMode::Fbp : InputMode::Noise;
    dc.init_checkpoint = checkpoint;
    dc.seed = seed;
    dc.freeze_encoder = m.freeze_encoder;
    dc.gamma_prime = m.gamma_prime;
    dc.lr_schedule = m.lr.build();
    dc.max_iters = m.max_iters;
    if (m.use_stop_rule) dc.stop_rule = StopRule{m.stop_window, m.stop_threshold};
    dc.eval_every = m.eval_every;
    return dc;
}

void write_history_csv(const std::string& path, const RunHistory& h) {
    CsvWriter csv(path, "iter,loss,data_fit,tv,psnr,wall_ms");
    for (const auto& r : h.records)
        csv.row({csv_num(r.iter), csv_num(r.loss), csv_num(r.data_fit), csv_num(r.tv),
                 csv_num(r.psnr), csv_num(r.wall_ms)});
}

// psnr trace (eval_every grid) from an on-disk history export
void read_history_trace(const std::string& path, std::vector<int64_t>& grid,
                        std::vector<double>& trace) {
    grid.clear();
    trace.clear();
    const auto rows = read_csv(path);
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 6) throw Error("malformed history csv: " + path);
        const std::string& p = rows[i][4];
        if (p == "nan") continue;
        grid.push_back(std::stoll(rows[i][0]));
        trace.push_back(std::stod(p));
    }
}

std::string selected_checkpoint_from_disk(const Workspace& ws) {
    require_file(ws.selection_json_path(), "select");
    std::ifstream f(ws.selection_json_path());
    nlohmann::json j;
    f >> j;
    return j.at("selected_checkpoint").get<std::string>();
}

ConvergenceSummary summarize_single(const std::vector<int64_t>& grid,
                                    const std::vector<double>& trace,
                                    const MetricsSection& mo) {
    AggregatedTrace at = aggregate_traces({grid}, {trace});
    const double steady = steady_psnr(at, mo.tail_fraction);
    return summarize(at, steady, mo.rise_margin_db, mo.tail_fraction);
}

}  // namespace

Workspace Workspace::open(ExperimentConfig config) {
    config.validate();
    Workspace ws;
    ws.root = config.output_dir + "/" + hex16(config.hash());
    ws.config = std::move(config);
    fs::create_directories(ws.root);
    // every run keeps a copy of the full config next to its artifacts
    ws.config.save(ws.root + "/config.json");
    return ws;
}

uint64_t Workspace::validation_noise_seed() const {
    return mix64(config.hash() ^ 0x73686570706c6fULL);
}

uint64_t Workspace::pretrain_run_seed(int run) const {
    return mix64(config.hash() ^ (0x70726574726169ULL + static_cast<uint64_t>(run)));
}

SelectionResult apply_selection_rule(std::vector<SelectionCandidate> candidates,
                                     double margin_db) {
    if (candidates.empty()) throw Error("selection: no candidate checkpoints");
    SelectionResult res;
    if (candidates.size() == 1) {
        candidates[0].eligible = true;
        res.candidates = std::move(candidates);
        res.selected_index = 0;
        res.selected_checkpoint = res.candidates[0].checkpoint;
        res.rationale = "only candidate";
        return res;
    }
    double best_steady = -std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) best_steady = std::max(best_steady, c.steady_psnr);
    int pick = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
        auto& c = candidates[i];
        c.eligible = c.steady_psnr >= best_steady - margin_db;
        if (!c.eligible) continue;
        if (pick < 0) {
            pick = static_cast<int>(i);
            continue;
        }
        const auto& p = candidates[static_cast<size_t>(pick)];
        const bool c_reached = c.rise_time != kNotReached;
        const bool p_reached = p.rise_time != kNotReached;
        if (c_reached && (!p_reached || c.rise_time < p.rise_time))
            pick = static_cast<int>(i);
        else if (!c_reached && !p_reached && c.steady_psnr > p.steady_psnr)
            pick = static_cast<int>(i);
    }
    res.candidates = std::move(candidates);
    res.selected_index = pick;
    res.selected_checkpoint = res.candidates[static_cast<size_t>(pick)].checkpoint;
    const auto& sel = res.candidates[static_cast<size_t>(pick)];
    if (sel.rise_time != kNotReached)
        res.rationale = "shortest rise time (" + std::to_string(sel.rise_time) +
                        " iters) among candidates within " + csv_num(margin_db) +
                        " dB of the best steady PSNR (" + csv_num(best_steady) + " dB)";
    else
        res.rationale = "no eligible candidate reached its rise threshold; "
                        "picked the highest steady PSNR (" +
                        csv_num(sel.steady_psnr) + " dB)";
    return res;
}

void cmd_simulate(const Workspace& ws) {
    const auto& cfg = ws.config;
    const int64_t n = cfg.geometry.image_size;
    fs::create_directories(ws.simulate_dir());
    RayTransform op(cfg.geometry.build());

    const std::vector<double> test = build_test_phantom(cfg, cfg.hash());
    const std::vector<double> shepp = shepp_logan(n);
    save_image(ws.simulate_dir() + "/phantom_test", test, n);
    save_image(ws.simulate_dir() + "/phantom_shepp", shepp, n);

    CsvWriter csv(ws.simulate_dir() + "/simulate.csv", "phantom,seed,fbp_psnr");
    for (uint64_t seed : cfg.seeds) {
        Measurement m = simulate_measurement(op, test, cfg.noise, seed);
        save_tensor(ws.test_sino_path(seed),
                    Tensor::from_data({static_cast<int64_t>(m.sinogram.size())}, m.sinogram));
        save_image(ws.simulate_dir() + "/fbp_test_seed" + std::to_string(seed), m.fbp, n);
        csv.row({"test", csv_num(static_cast<int64_t>(seed)), csv_num(psnr(m.fbp, test))});
    }
    const uint64_t vseed = ws.validation_noise_seed();
    Measurement mv = simulate_measurement(op, shepp, cfg.noise, vseed);
    save_tensor(ws.val_sino_path(),
                Tensor::from_data({static_cast<int64_t>(mv.sinogram.size())}, mv.sinogram));
    save_image(ws.simulate_dir() + "/fbp_shepp", mv.fbp, n);
    csv.row({"shepp-logan", csv_num(static_cast<int64_t>(vseed)), csv_num(psnr(mv.fbp, shepp))});
}

void cmd_pretrain(const Workspace& ws) {
    const auto& cfg = ws.config;
    RayTransform op(cfg.geometry.build());
    for (int run = 0; run < cfg.pretrain.num_runs; ++run) {
        PretrainConfig pc;
        pc.epochs = cfg.pretrain.epochs;
        pc.samples_per_epoch = cfg.pretrain.samples_per_epoch;
        pc.val_samples = cfg.pretrain.val_samples;
        pc.batch_size = cfg.pretrain.batch_size;
        pc.lr_schedule = LearningRateSchedule::constant(cfg.pretrain.lr);
        pc.checkpoint_every_epochs = cfg.pretrain.checkpoint_every_epochs;
        pc.seed = ws.pretrain_run_seed(run);
        pc.output_dir = ws.pretrain_run_dir(run);
        fs::create_directories(pc.output_dir);
        PretrainRecord rec = pretrain(pc, cfg.unet, cfg.dataset, op, cfg.noise);
        if (rec.aborted) throw Error("pretrain run " + std::to_string(run) + " diverged");
        CsvWriter csv(pc.output_dir + "/training_log.csv",
                      "epoch,train_loss,val_loss,checkpoint_path");
        for (const auto& e : rec.epochs)
            csv.row({csv_num(static_cast<int64_t>(e.epoch)), csv_num(e.train_loss),
                     csv_num(e.val_loss), e.checkpoint_path});
    }
}

SelectionResult cmd_select(const Workspace& ws) {
    const auto& cfg = ws.config;
    require_file(ws.val_sino_path(), "simulate");
    std::vector<std::string> candidates;
    for (int run = 0; run < cfg.pretrain.num_runs; ++run) {
        const std::string log = ws.pretrain_run_dir(run) + "/training_log.csv";
        require_file(log, "pretrain");
        for (const auto& row : read_csv(log)) {
            if (row.size() >= 4 && !row[3].empty() && row[3] != "checkpoint_path")
                candidates.push_back(row[3]);
        }
        const std::string minval = ws.pretrain_run_dir(run) + "/ckpt_minval.edipc";
        if (fs::exists(minval) &&
            std::find(candidates.begin(), candidates.end(), minval) == candidates.end())
            candidates.push_back(minval);
    }
    if (candidates.empty()) throw Error("no checkpoints found; run `edip pretrain` first");

    RayTransform op(cfg.geometry.build());
    const std::vector<double> shepp = shepp_logan(cfg.geometry.image_size);
    const std::vector<double> y = load_flat(ws.val_sino_path());

    std::vector<SelectionCandidate> summaries;
    for (const auto& ck : candidates) {
        MethodSection m;
        m.name = "select-edip-fbp";
        m.input = "fbp";
        m.pretrained = true;
        m.gamma_prime = cfg.select.gamma_prime;
        m.lr = cfg.select.lr;
        m.max_iters = cfg.select.max_iters;
        m.eval_every = cfg.select.eval_every;
        DipConfig dc = method_dip_config(m, mix64(cfg.hash() ^ 0x73656c656374ULL), ck);
        DipResult res = dip_reconstruct(dc, cfg.unet, op, y, shepp);
        if (res.history.aborted)
            throw Error("selection fine-tune diverged for checkpoint " + ck);
        ConvergenceSummary s = summarize_single(res.history.psnr_grid(),
                                                res.history.psnr_trace(), cfg.metrics);
        summaries.push_back({ck, s.steady_psnr_db, s.rise_time_iter, false});
    }
    SelectionResult result = apply_selection_rule(std::move(summaries),
                                                  cfg.metrics.selection_margin_db);

    fs::create_directories(ws.select_dir());
    CsvWriter csv(ws.select_dir() + "/selection.csv",
                  "checkpoint,steady_psnr,rise_time,eligible,selected");
    for (size_t i = 0; i < result.candidates.size(); ++i) {
        const auto& c = result.candidates[i];
        csv.row({c.checkpoint, csv_num(c.steady_psnr), csv_num(c.rise_time),
                 c.eligible ? "1" : "0",
                 static_cast<int>(i) == result.selected_index ? "1" : "0"});
    }
    nlohmann::json j;
    j["selected_checkpoint"] = result.selected_checkpoint;
    j["rationale"] = result.rationale;
    std::ofstream jf(ws.selection_json_path());
    jf << j.dump(2) << "\n";
    return result;
}

void cmd_reconstruct(const Workspace& ws) {
    const auto& cfg = ws.config;
    require_file(ws.test_phantom_path(), "simulate");
    RayTransform op(cfg.geometry.build());
    const std::vector<double> gt = load_flat(ws.test_phantom_path());
    const int64_t n = cfg.geometry.image_size;

    std::optional<std::string> selected;
    for (const auto& m : cfg.methods) {
        if (m.pretrained && !selected) selected = selected_checkpoint_from_disk(ws);
    }
    for (const auto& m : cfg.methods) {
        for (uint64_t seed : cfg.seeds) {
            require_file(ws.test_sino_path(seed), "simulate");
            const std::vector<double> y = load_flat(ws.test_sino_path(seed));
            DipConfig dc = method_dip_config(
                m, seed, m.pretrained ? selected : std::optional<std::string>{});
            DipResult res = dip_reconstruct(dc, cfg.unet, op, y, gt);
            const std::string dir = ws.reconstruct_dir(m.name, seed);
            fs::create_directories(dir);
            write_history_csv(dir + "/history.csv", res.history);
            save_image(dir + "/final", res.final_output, n);
            save_image(dir + "/minloss", res.min_loss_output, n);
            if (res.history.aborted)
                throw Error("method " + m.name + " seed " + std::to_string(seed) +
                            " aborted on non-finite loss (history exported)");
        }
    }
}

void cmd_spectra(const Workspace& ws) {
    const auto& cfg = ws.config;
    const MethodSection* m = cfg.find_method(cfg.spectra.method);
    if (!m) throw Error("spectra: config has no method named '" + cfg.spectra.method + "'");
    const uint64_t seed = cfg.seeds.front();
    require_file(ws.test_sino_path(seed), "simulate");
    require_file(ws.test_phantom_path(), "simulate");
    RayTransform op(cfg.geometry.build());
    const std::vector<double> y = load_flat(ws.test_sino_path(seed));
    const std::vector<double> gt = load_flat(ws.test_phantom_path());

    std::optional<std::string> checkpoint;
    if (m->pretrained) checkpoint = selected_checkpoint_from_disk(ws);

    DipConfig dc = method_dip_config(*m, seed, checkpoint);
    dc.snapshot_iters = {cfg.spectra.mid_iter};
    DipResult res = dip_reconstruct(dc, cfg.unet, op, y, gt);
    if (res.history.aborted) throw Error("spectra fine-tune aborted on non-finite loss");

    // tag -> parameters (random init always included for comparison)
    std::map<std::string, UNetParams> tagged;
    tagged.emplace("random", init_params(cfg.unet, seed));
    if (checkpoint) {
        tagged.emplace("init", load_checkpoint(*checkpoint, cfg.unet).params);
    } else {
        tagged.emplace("init", init_params(cfg.unet, dc.seed));
    }
    {
        UNetParams mid = res.params.clone();
        auto it = res.snapshots.find(cfg.spectra.mid_iter);
        if (it == res.snapshots.end()) it = res.snapshots.begin();
        mid.unflatten(it->second);
        tagged.emplace("mid", std::move(mid));
    }
    tagged.emplace("conv", res.params.clone());

    RsvdConfig rc;
    rc.rank = cfg.spectra.rank;
    rc.oversampling = cfg.spectra.oversampling;
    rc.probe_seed = mix64(cfg.hash() ^ 0x70726f6265ULL);
    rc.fd_eps_scale = 1e-3;

    std::vector<PlotSeries> sv_series;
    for (const auto& [tag, params] : tagged) {
        SpectralReport rep = rsvd(params, res.input, op, rc);
        rep.checkpoint_tag = tag;
        const std::string dir = ws.spectra_dir(tag);
        fs::create_directories(dir);
        {
            CsvWriter csv(dir + "/singular_values.csv", "index,sigma");
            for (size_t i = 0; i < rep.singular_values.size(); ++i)
                csv.row({csv_num(static_cast<int64_t>(i)), csv_num(rep.singular_values[i])});
        }
        {
            CsvWriter csv(dir + "/block_mass.csv", "vector_index,block,mass");
            for (int64_t k = 0; k < rep.block_mass.rows; ++k)
                for (int64_t b = 0; b < rep.block_mass.cols; ++b)
                    csv.row({csv_num(k), rep.block_names[static_cast<size_t>(b)],
                             csv_num(rep.block_mass.at(k, b))});
        }
        {
            CsvWriter csv(dir + "/hoyer.csv", "vector_index,hoyer");
            for (size_t i = 0; i < rep.hoyer_per_vector.size(); ++i)
                csv.row({csv_num(static_cast<int64_t>(i)), csv_num(rep.hoyer_per_vector[i])});
        }
        {
            BlockMassSummary hs = block_histogram(rep);
            CsvWriter csv(dir + "/block_histogram.csv",
                          "block,tag,leading_mean_mass,trailing_mean_mass");
            for (size_t b = 0; b < rep.block_names.size(); ++b)
                csv.row({rep.block_names[b], rep.block_tags[b], csv_num(hs.leading_mean_mass[b]),
                         csv_num(hs.trailing_mean_mass[b])});
            CsvWriter hcsv(dir + "/hoyer_summary.csv", "group,mean_hoyer");
            hcsv.row({"leading", csv_num(hs.leading_mean_hoyer)});
            hcsv.row({"trailing", csv_num(hs.trailing_mean_hoyer)});
        }
        PlotSeries s;
        s.label = tag;
        for (size_t i = 0; i < rep.singular_values.size(); ++i) {
            s.x.push_back(static_cast<double>(i + 1));
            s.y.push_back(rep.singular_values[i]);
        }
        sv_series.push_back(std::move(s));
    }
    PlotOptions po;
    po.log_x = true;
    po.log_y = true;
    po.title = "APPROXIMATE SINGULAR VALUES";
    po.x_label = "INDEX";
    po.y_label = "SIGMA";
    line_plot(ws.root + "/spectra/singular_values.png", sv_series, po);
}

void cmd_report(const Workspace& ws) {
    const auto& cfg = ws.config;
    fs::create_directories(ws.report_dir());
    CsvWriter csv(ws.report_dir() + "/summary.csv",
                  "method,rise_time,max_psnr,max_psnr_iter,steady_psnr,init_psnr");
    std::vector<PlotSeries> traces;
    for (const auto& m : cfg.methods) {
        std::vector<std::vector<int64_t>> grids;
        std::vector<std::vector<double>> psnrs;
        for (uint64_t seed : cfg.seeds) {
            const std::string h = ws.reconstruct_dir(m.name, seed) + "/history.csv";
            require_file(h, "reconstruct");
            std::vector<int64_t> grid;
            std::vector<double> trace;
            read_history_trace(h, grid, trace);
            grids.push_back(std::move(grid));
            psnrs.push_back(std::move(trace));
        }
        AggregatedTrace at = aggregate_traces(grids, psnrs);
        const double steady = steady_psnr(at, cfg.metrics.tail_fraction);
        ConvergenceSummary s =
            summarize(at, steady, cfg.metrics.rise_margin_db, cfg.metrics.tail_fraction);
        csv.row({m.name, csv_num(s.rise_time_iter), csv_num(s.max_psnr_db),
                 csv_num(s.max_psnr_iter), csv_num(s.steady_psnr_db), csv_num(s.init_psnr_db)});
        PlotSeries ps;
        ps.label = m.name;
        for (size_t i = 0; i < at.iterations.size(); ++i) {
            ps.x.push_back(static_cast<double>(std::max<int64_t>(at.iterations[i], 1)));
            ps.y.push_back(at.median_psnr[i]);
        }
        traces.push_back(std::move(ps));
    }
    PlotOptions po;
    po.log_x = true;
    po.title = "MEDIAN PSNR VS ITERATION";
    po.x_label = "ITERATION";
    po.y_label = "PSNR";
    line_plot(ws.report_dir() + "/convergence.png", traces, po);
}

void run_command(const std::string& command, const ExperimentConfig& config) {
    Workspace ws = Workspace::open(config);
    if (command == "simulate")
        cmd_simulate(ws);
    else if (command == "pretrain")
        cmd_pretrain(ws);
    else if (command == "select")
        cmd_select(ws);
    else if (command == "reconstruct")
        cmd_reconstruct(ws);
    else if (command == "spectra")
        cmd_spectra(ws);
    else if (command == "report")
        cmd_report(ws);
    else
        throw Error("unknown command '" + command +
                    "' (expected simulate|pretrain|select|reconstruct|spectra|report)");
}

}  // namespace edip
