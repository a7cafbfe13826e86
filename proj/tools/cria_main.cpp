// Command-line front end: preprocess, pretrain, finetune, evaluate,
// robustness, dump-features, generate. Exit codes: 0 ok, 2 config,
// 3 data, 4 divergence.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cria/checkpoint.hpp"
#include "cria/config.hpp"
#include "cria/dataset.hpp"
#include "cria/edf.hpp"
#include "cria/finetune.hpp"
#include "cria/kernels.hpp"
#include "cria/metrics.hpp"
#include "cria/model.hpp"
#include "cria/pretrain.hpp"

namespace {

using namespace cria;

Config make_schema() {
    Config c;
    c.define("seed", "", "run seed; mandatory for train commands");
    c.define("dim", "64", "segment length and hidden width D");
    c.define("heads", "4", "attention heads");
    c.define("layers", "5", "encoder layers");
    c.define("c_max", "32", "channel embedding table size");
    c.define("rope_start_index", "1", "first rotary position index");
    c.define("rope_before_embed", "true", "rotary encoding before adding channel embeddings");
    c.define("purify_kc", "0", "channels kept by purification; 0 = ceil(C/2)");
    c.define("purify_kt", "0", "segments kept by purification; 0 = ceil(N/2)");
    c.define("temperature", "0.2", "contrastive softmax temperature");
    c.define("lr", "0.001", "Adam learning rate");
    c.define("beta1", "0.9", "Adam first-moment decay");
    c.define("beta2", "0.999", "Adam second-moment decay");
    c.define("adam_eps", "1e-8", "Adam epsilon");
    c.define("batch_size", "4", "slices per optimizer step");
    c.define("pretrain_steps", "500", "pre-training steps");
    c.define("finetune_steps", "300", "fine-tuning steps");
    c.define("crop_segments", "8", "pre-training segment crop length; 0 = full slice");
    c.define("mask_per_batch", "false", "one masked view per batch instead of per sample");
    c.define("symmetric_loss", "false", "symmetric two-directional contrastive loss");
    c.define("attn_value_mask_ratio", "0.1", "post-softmax attention masking ratio (fine-tuning)");
    c.define("loss", "ce", "task loss: ce | bce | focal");
    c.define("focal_gamma", "2.0", "focal loss gamma");
    c.define("focal_alpha", "0.25", "focal loss alpha");
    c.define("head_hidden", "0", "decoder hidden width; 0 = dim");
    c.define("head_dropout", "0.1", "decoder dropout rate");
    c.define("freeze_encoder", "false", "fine-tune only the decoder head");
    c.define("last_layers", "0", "keep only the last n encoder layers; 0 = all");
    c.define("train_frac", "0.8", "training split fraction");
    c.define("val_frac", "0.1", "validation split fraction");
    c.define("split_seed", "7", "seeded split shuffle");
    c.define("log_every", "10", "steps between training log rows");
    c.define("resample_rate", "200", "preprocess target rate in Hz");
    c.define("bandpass_low", "0.5", "band-pass low cutoff in Hz");
    c.define("bandpass_high", "120", "band-pass high cutoff in Hz (clamped below Nyquist)");
    c.define("filter_order", "4", "Butterworth order per band edge");
    c.define("notch_hz", "60", "comma-separated notch frequencies in Hz");
    c.define("notch_q", "30", "notch quality factor");
    c.define("norm_percentile", "95", "absolute-amplitude normalization percentile");
    c.define("slice_seconds", "10", "slice duration in seconds");
    c.define("classes", "3", "synthetic classes");
    c.define("channels", "8", "synthetic channels");
    c.define("per_class", "300", "synthetic slices per class");
    c.define("noise_sigma", "0.7", "synthetic Gaussian background sigma");
    c.define("noise_seeds", "5", "robustness noise seeds per grid cell");
    return c;
}

// deterministic text form for every float we log
std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key=value config file");
        app->add_option("--set", sets, "override a config key (key=value, repeatable)");
    }
    void apply(Config& cfg) const {
        if (!config_file.empty()) cfg.load_file(config_file);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("config: --set expects key=value, got '" + s + "'");
            cfg.set_flag(s.substr(0, eq), s.substr(eq + 1));
        }
    }
};

std::uint64_t require_seed(const Config& cfg) {
    if (cfg.get("seed").empty()) throw ConfigError("config: 'seed' is mandatory for this command");
    return cfg.get_u64("seed");
}

std::uint64_t seed_or_zero(const Config& cfg) {
    return cfg.get("seed").empty() ? 0 : cfg.get_u64("seed");
}

ModelConfig model_config(const Config& cfg, int dataset_channels) {
    ModelConfig m;
    m.dim = static_cast<int>(cfg.get_int("dim"));
    m.heads = static_cast<int>(cfg.get_int("heads"));
    m.layers = static_cast<int>(cfg.get_int("layers"));
    m.c_max = std::max(static_cast<int>(cfg.get_int("c_max")), dataset_channels);
    m.rope_start_index = static_cast<int>(cfg.get_int("rope_start_index"));
    m.rope_before_embed = cfg.get_bool("rope_before_embed");
    m.purify.k_c = static_cast<int>(cfg.get_int("purify_kc"));
    m.purify.k_t = static_cast<int>(cfg.get_int("purify_kt"));
    return m;
}

SegmentedSlice segment_for_model(const EegSlice& s, int dim) {
    std::vector<int> ids(s.data.size());
    for (std::size_t c = 0; c < ids.size(); ++c) ids[c] = static_cast<int>(c);
    return segment_slice(s, dim, ids);
}

SegmentedSlice crop(const SegmentedSlice& s, int n0, int len) {
    SegmentedSlice out;
    out.channels = s.channels;
    out.segments = len;
    out.segment_len = s.segment_len;
    out.channel_ids = s.channel_ids;
    out.data.resize(static_cast<std::size_t>(s.channels) * len * s.segment_len);
    for (int c = 0; c < s.channels; ++c) {
        const std::size_t src = (static_cast<std::size_t>(c) * s.segments + n0) * s.segment_len;
        const std::size_t dst = static_cast<std::size_t>(c) * len * s.segment_len;
        std::copy_n(s.data.begin() + src, static_cast<std::size_t>(len) * s.segment_len,
                    out.data.begin() + dst);
    }
    return out;
}

std::vector<SegmentedSlice> segment_dataset(const SliceDataset& ds, int dim) {
    std::vector<SegmentedSlice> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(segment_for_model(ds.slice(i), dim));
    return out;
}

std::ofstream open_log(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DatasetError("cannot open log file '" + path + "'");
    return f;
}

// ------------------------------------------------------------ commands

int cmd_generate(const Config& cfg, const std::string& out) {
    SyntheticSpec spec;
    spec.classes = static_cast<int>(cfg.get_int("classes"));
    spec.channels = static_cast<int>(cfg.get_int("channels"));
    spec.sample_rate = cfg.get_double("resample_rate");
    spec.slice_len = static_cast<int>(std::lround(cfg.get_double("slice_seconds") * spec.sample_rate));
    spec.per_class = static_cast<int>(cfg.get_int("per_class"));
    spec.noise_sigma = cfg.get_double("noise_sigma");
    spec.seed = require_seed(cfg);
    save_dataset(out, generate_synthetic_dataset(spec));
    std::cout << "wrote " << out << " (" << spec.classes << " classes, " << spec.per_class
              << " slices/class)\n";
    return 0;
}

int cmd_preprocess(const Config& cfg, const std::string& in, const std::string& out) {
    EegRecording rec = parse_edf(in);
    const double rate = cfg.get_double("resample_rate");
    rec = resample(rec, rate);
    const double low = cfg.get_double("bandpass_low");
    // the configured 120 Hz default is above Nyquist at 200 Hz; clamp
    const double high = std::min(cfg.get_double("bandpass_high"), 0.45 * rate);
    rec = bandpass_butterworth(rec, low, high, static_cast<int>(cfg.get_int("filter_order")));
    std::vector<double> notches;
    std::stringstream ss(cfg.get("notch_hz"));
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) notches.push_back(std::stod(tok));
    for (double f : notches)
        if (f >= rate / 2.0)
            throw ConfigError("config: notch frequency " + fmt(f) + " is at or above Nyquist");
    rec = notch_filter(rec, notches, cfg.get_double("notch_q"));

    const int slice_len = static_cast<int>(std::lround(cfg.get_double("slice_seconds") * rate));
    if (slice_len < 2) throw ConfigError("config: slice_seconds too small");
    const std::size_t n_slices = rec.samples() / static_cast<std::size_t>(slice_len);
    if (n_slices == 0) throw DatasetError("preprocess: recording shorter than one slice");

    SliceDataset ds;
    ds.channels = rec.channels();
    ds.slice_len = slice_len;
    ds.sample_rate = rate;
    ds.num_classes = 2;  // unlabeled; records carry label 0
    ds.channel_names = rec.channel_names;
    EegSlice s;
    s.channel_names = rec.channel_names;
    s.data.assign(rec.channels(), std::vector<double>(slice_len));
    for (std::size_t i = 0; i < n_slices; ++i) {
        for (int c = 0; c < rec.channels(); ++c)
            std::copy_n(rec.data[c].begin() + i * slice_len, slice_len, s.data[c].begin());
        ds.append(percentile_normalize(s), 0);
    }
    save_dataset(out, ds);
    std::cout << "wrote " << out << " (" << n_slices << " slices, " << rec.channels() << " channels at "
              << rate << " Hz)\n";
    return 0;
}

int cmd_pretrain(const Config& cfg, const std::string& data, const std::string& out,
                 const std::string& log_path) {
    const std::uint64_t seed = require_seed(cfg);
    const SliceDataset ds = load_dataset(data);
    const ModelConfig mc = model_config(cfg, ds.channels);
    if (ds.slice_len % mc.dim != 0 && ds.slice_len < mc.dim)
        throw DatasetError("pretrain: slices shorter than one segment");

    Rng root(seed);
    Rng init_rng = root.substream("model-init");
    Rng step_rng = root.substream("pretrain-steps");
    ModelParams model = init_model(mc, init_rng);
    AdamConfig ac{cfg.get_double("lr"), cfg.get_double("beta1"), cfg.get_double("beta2"),
                  cfg.get_double("adam_eps")};
    Adam opt(ac);
    model.visit([&](const std::string& name, Tensor& t) { opt.attach(name, t); });

    const auto split = split_dataset(ds.size(), cfg.get_double("train_frac"), cfg.get_double("val_frac"),
                                     cfg.get_u64("split_seed"));
    if (split.train.size() < 2) throw DatasetError("pretrain: training split needs at least two slices");
    const int batch = std::max<int>(2, static_cast<int>(cfg.get_int("batch_size")));
    const int steps = static_cast<int>(cfg.get_int("pretrain_steps"));
    const int crop_n = static_cast<int>(cfg.get_int("crop_segments"));
    const int log_every = std::max<int>(1, static_cast<int>(cfg.get_int("log_every")));
    PretrainOptions po;
    po.temperature = cfg.get_double("temperature");
    po.symmetric_loss = cfg.get_bool("symmetric_loss");
    po.per_batch_mask = cfg.get_bool("mask_per_batch");

    std::ofstream log = open_log(log_path);
    log << "step,loss,masked_temporal,masked_spatial,masked_spectral\n";
    for (int step = 1; step <= steps; ++step) {
        std::vector<SegmentedSlice> slices;
        slices.reserve(batch);
        for (int b = 0; b < batch; ++b) {
            const std::size_t i = split.train[step_rng.below(split.train.size())];
            SegmentedSlice seg = segment_for_model(ds.slice(i), mc.dim);
            if (crop_n > 0 && crop_n < seg.segments)
                seg = crop(seg, static_cast<int>(step_rng.below(seg.segments - crop_n + 1)), crop_n);
            slices.push_back(std::move(seg));
        }
        const auto res = pretrain_step(model, opt, std::move(slices), step_rng, po);
        if (step == 1 || step == steps || step % log_every == 0) {
            log << step << ',' << fmt(res.loss) << ',' << res.mask_histogram[0] << ','
                << res.mask_histogram[1] << ',' << res.mask_histogram[2] << '\n';
            std::cout << "step " << step << " loss " << res.loss << '\n';
        }
    }
    save_checkpoint(out, model, nullptr, &opt, step_rng, steps);
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_finetune(const Config& cfg, const std::string& data, const std::string& from,
                 const std::string& out, const std::string& log_path) {
    const std::uint64_t seed = require_seed(cfg);
    const SliceDataset ds = load_dataset(data);

    Rng root(seed);
    Rng init_rng = root.substream("model-init");
    Rng head_rng = root.substream("head-init");
    Rng step_rng = root.substream("finetune-steps");

    ModelParams model = [&] {
        if (from.empty()) return init_model(model_config(cfg, ds.channels), init_rng);
        LoadedCheckpoint ck = load_checkpoint(from);
        return std::move(ck.model);
    }();
    if (ds.channels > model.cfg.c_max)
        throw DatasetError("finetune: dataset has more channels than the embedding table");
    const int last = static_cast<int>(cfg.get_int("last_layers"));
    if (last > 0) keep_last_layers(model, last);

    FinetuneOptions fo;
    fo.loss = task_loss_from_name(cfg.get("loss"));
    fo.attn_value_mask_ratio = cfg.get_double("attn_value_mask_ratio");
    fo.focal_gamma = cfg.get_double("focal_gamma");
    fo.focal_alpha = cfg.get_double("focal_alpha");
    if (fo.loss != TaskLoss::multiclass && ds.num_classes != 2)
        throw ConfigError("config: loss '" + std::string(task_loss_name(fo.loss)) + "' needs binary labels");

    const int hidden_cfg = static_cast<int>(cfg.get_int("head_hidden"));
    const int head_classes = fo.loss == TaskLoss::multiclass ? ds.num_classes : 1;
    HeadParams head = init_head(model.cfg.dim, hidden_cfg > 0 ? hidden_cfg : model.cfg.dim, head_classes,
                                cfg.get_double("head_dropout"), head_rng);

    AdamConfig ac{cfg.get_double("lr"), cfg.get_double("beta1"), cfg.get_double("beta2"),
                  cfg.get_double("adam_eps")};
    Adam opt(ac);
    if (!cfg.get_bool("freeze_encoder"))
        model.visit([&](const std::string& name, Tensor& t) { opt.attach(name, t); });
    head.visit([&](const std::string& name, Tensor& t) { opt.attach(name, t); });

    const auto split = split_dataset(ds.size(), cfg.get_double("train_frac"), cfg.get_double("val_frac"),
                                     cfg.get_u64("split_seed"));
    if (split.train.empty()) throw DatasetError("finetune: empty training split");
    const int batch = std::max<int>(1, static_cast<int>(cfg.get_int("batch_size")));
    const int steps = static_cast<int>(cfg.get_int("finetune_steps"));
    const int log_every = std::max<int>(1, static_cast<int>(cfg.get_int("log_every")));
    const std::vector<SegmentedSlice> segs = segment_dataset(ds, model.cfg.dim);

    std::ofstream log = open_log(log_path);
    log << "step,loss\n";
    for (int step = 1; step <= steps; ++step) {
        std::vector<SegmentedSlice> slices;
        std::vector<int> labels;
        for (int b = 0; b < batch; ++b) {
            const std::size_t i = split.train[step_rng.below(split.train.size())];
            slices.push_back(segs[i]);
            labels.push_back(fo.loss == TaskLoss::multiclass ? ds.labels[i] : (ds.labels[i] != 0 ? 1 : 0));
        }
        const auto res = finetune_step(model, head, opt, slices, labels, step_rng, fo);
        if (step == 1 || step == steps || step % log_every == 0) {
            log << step << ',' << fmt(res.loss) << '\n';
            std::cout << "step " << step << " loss " << res.loss << '\n';
        }
    }
    save_checkpoint(out, model, &head, &opt, step_rng, steps);
    std::cout << "wrote " << out << '\n';
    return 0;
}

MetricsReport evaluate_split(const SliceDataset& ds, const std::vector<std::size_t>& idx,
                             const ModelParams& model, const HeadParams& head,
                             const NoiseSpec* noise = nullptr) {
    if (idx.empty()) throw DatasetError("evaluate: empty split");
    std::vector<double> scores;
    std::vector<int> labels;
    const int k = head.num_classes();
    for (std::size_t i : idx) {
        EegSlice s = ds.slice(i);
        if (noise) {
            NoiseSpec per = *noise;
            per.seed = noise->seed ^ (0x9e3779b97f4a7c15ull * (i + 1));
            per.sample_rate = ds.sample_rate;
            s = inject_noise(s, per);
        }
        const Tensor y = predict_scores({segment_for_model(s, model.cfg.dim)}, model, head);
        if (k == 1) {  // binary score column -> two-class scores
            scores.push_back(-y.data()[0]);
            scores.push_back(y.data()[0]);
        } else {
            scores.insert(scores.end(), y.data().begin(), y.data().end());
        }
        labels.push_back(k == 1 ? (ds.labels[i] != 0 ? 1 : 0) : ds.labels[i]);
    }
    // binary heads score one column; metrics always see two columns
    return compute_metrics(scores, k == 1 ? 2 : k, labels);
}

void print_report(const MetricsReport& r) {
    std::cout << "bacc " << r.bacc << "\nauroc " << r.auroc << "\npr_auc " << r.pr_auc << "\nkappa "
              << r.kappa << "\nweighted_f1 " << r.f1_weighted << "\nconfusion";
    for (const auto& row : r.confusion) {
        std::cout << '\n';
        for (int v : row) std::cout << ' ' << v;
    }
    std::cout << '\n';
}

const std::vector<std::size_t>& pick_split(const SplitIndices& split, const std::string& name,
                                           std::vector<std::size_t>& all_storage, std::size_t n) {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    if (name == "all") {
        all_storage.resize(n);
        for (std::size_t i = 0; i < n; ++i) all_storage[i] = i;
        return all_storage;
    }
    throw ConfigError("config: unknown split '" + name + "'");
}

int cmd_evaluate(const Config& cfg, const std::string& data, const std::string& from,
                 const std::string& split_name, const std::string& csv) {
    const SliceDataset ds = load_dataset(data);
    LoadedCheckpoint ck = load_checkpoint(from);
    if (!ck.head) throw CheckpointError("evaluate: checkpoint has no classification head");
    const auto split = split_dataset(ds.size(), cfg.get_double("train_frac"), cfg.get_double("val_frac"),
                                     cfg.get_u64("split_seed"));
    std::vector<std::size_t> all;
    const auto& idx = pick_split(split, split_name, all, ds.size());
    const MetricsReport r = evaluate_split(ds, idx, ck.model, *ck.head);
    print_report(r);
    if (!csv.empty()) {
        std::ofstream f = open_log(csv);
        f << "bacc,auroc,pr_auc,kappa,weighted_f1\n"
          << fmt(r.bacc) << ',' << fmt(r.auroc) << ',' << fmt(r.pr_auc) << ',' << fmt(r.kappa) << ','
          << fmt(r.f1_weighted) << '\n';
    }
    return 0;
}

int cmd_robustness(const Config& cfg, const std::string& data, const std::string& from,
                   const std::string& csv) {
    const SliceDataset ds = load_dataset(data);
    LoadedCheckpoint ck = load_checkpoint(from);
    if (!ck.head) throw CheckpointError("robustness: checkpoint has no classification head");
    const auto split = split_dataset(ds.size(), cfg.get_double("train_frac"), cfg.get_double("val_frac"),
                                     cfg.get_u64("split_seed"));
    const int n_seeds = std::max<int>(1, static_cast<int>(cfg.get_int("noise_seeds")));
    const std::uint64_t base_seed = seed_or_zero(cfg);

    std::ofstream f = open_log(csv);
    f << "kind,level,seed,bacc\n";
    for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::impulse, NoiseKind::dropout,
                           NoiseKind::sinusoidal_50hz}) {
        for (NoiseLevel level : {NoiseLevel::none, NoiseLevel::low, NoiseLevel::mid, NoiseLevel::high}) {
            for (int s = 0; s < n_seeds; ++s) {
                NoiseSpec spec;
                spec.kind = kind;
                spec.level = level;
                spec.seed = base_seed + static_cast<std::uint64_t>(s);
                const MetricsReport r = evaluate_split(ds, split.test, ck.model, *ck.head, &spec);
                f << noise_kind_name(kind) << ',' << noise_level_name(level) << ',' << s << ','
                  << fmt(r.bacc) << '\n';
                std::cout << noise_kind_name(kind) << ' ' << noise_level_name(level) << " seed " << s
                          << " bacc " << r.bacc << '\n';
            }
        }
    }
    return 0;
}

void dump_csv(const std::string& path, const Tensor& t) {
    std::ofstream f = open_log(path);
    const int r = t.rank() == 2 ? t.rows() : 1;
    const int c = t.rank() == 2 ? t.cols() : static_cast<int>(t.size());
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) f << (j ? "," : "") << fmt(t.data()[static_cast<std::size_t>(i) * c + j]);
        f << '\n';
    }
}

int cmd_dump_features(const Config& cfg, const std::string& data, const std::string& from,
                      std::size_t index, const std::string& prefix) {
    const SliceDataset ds = load_dataset(data);
    if (index >= ds.size()) throw DatasetError("dump-features: slice index out of range");
    ModelParams model = [&] {
        if (from.empty()) {
            Rng init_rng = Rng(seed_or_zero(cfg)).substream("model-init");
            return init_model(model_config(cfg, ds.channels), init_rng);
        }
        return std::move(load_checkpoint(from).model);
    }();
    const SegmentedSlice seg = segment_for_model(ds.slice(index), model.cfg.dim);
    MultiViewFeatures v = build_views(seg, model);
    dump_csv(prefix + "_input_temporal.csv", v.f_tem);
    dump_csv(prefix + "_input_spatial.csv", v.f_spa);
    dump_csv(prefix + "_input_spectral.csv", v.f_spe);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        v = encoder_layer(v, model.layers[l], model.pads, MaskSpec{});
        const std::string tag = "_layer" + std::to_string(l + 1);
        dump_csv(prefix + tag + "_temporal.csv", v.f_tem);
        dump_csv(prefix + tag + "_spatial.csv", v.f_spa);
        dump_csv(prefix + tag + "_spectral.csv", v.f_spe);
    }
    const Tensor fused = scale(add(add(v.f_tem, v.f_spa), v.f_spe), 1.0 / 3.0);
    dump_csv(prefix + "_purified.csv",
             purify_and_fuse(fused, v.channels, v.segments, model.cfg.purify, model.purify_gain,
                             model.purify_bias));
    std::cout << "wrote " << prefix << "_*.csv (" << model.layers.size() << " layers)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-view EEG representation pipeline"};
    app.require_subcommand(1);

    Config cfg = make_schema();
    CommonArgs common;
    std::string in_path, data_path, out_path, ckpt_path, log_path, csv_path, split_name = "test",
                prefix = "features";
    std::size_t index = 0;

    auto* gen = app.add_subcommand("generate", "write a synthetic spectral-mixture dataset");
    common.attach(gen);
    gen->add_option("--out", out_path, "output dataset path")->required();

    auto* pre = app.add_subcommand("preprocess", "EDF -> filtered, normalized slice dataset");
    common.attach(pre);
    pre->add_option("--in", in_path, "input EDF file")->required();
    pre->add_option("--out", out_path, "output dataset path")->required();

    auto* pt = app.add_subcommand("pretrain", "view-masked contrastive pre-training");
    common.attach(pt);
    pt->add_option("--data", data_path, "slice dataset")->required();
    pt->add_option("--out", ckpt_path, "output checkpoint")->required();
    pt->add_option("--log", log_path, "loss CSV path (default <out>.loss.csv)");

    auto* ft = app.add_subcommand("finetune", "task training from a checkpoint or from scratch");
    common.attach(ft);
    ft->add_option("--data", data_path, "slice dataset")->required();
    ft->add_option("--from", in_path, "pre-trained checkpoint (omit to train from scratch)");
    ft->add_option("--out", ckpt_path, "output checkpoint")->required();
    ft->add_option("--log", log_path, "loss CSV path (default <out>.loss.csv)");

    auto* ev = app.add_subcommand("evaluate", "metrics on a held-out split");
    common.attach(ev);
    ev->add_option("--data", data_path, "slice dataset")->required();
    ev->add_option("--from", ckpt_path, "fine-tuned checkpoint")->required();
    ev->add_option("--split", split_name, "train | val | test | all (default test)");
    ev->add_option("--csv", csv_path, "also write metrics CSV");

    auto* rb = app.add_subcommand("robustness", "metrics under a noise kind/level grid");
    common.attach(rb);
    rb->add_option("--data", data_path, "slice dataset")->required();
    rb->add_option("--from", ckpt_path, "fine-tuned checkpoint")->required();
    rb->add_option("--csv", csv_path, "output grid CSV")->required();

    auto* df = app.add_subcommand("dump-features", "per-layer view tensors as CSV");
    common.attach(df);
    df->add_option("--data", data_path, "slice dataset")->required();
    df->add_option("--from", ckpt_path, "checkpoint (omit for a fresh seeded model)");
    df->add_option("--index", index, "slice index (default 0)");
    df->add_option("--prefix", prefix, "output file prefix (default features)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        common.apply(cfg);
        if (gen->parsed()) return cmd_generate(cfg, out_path);
        if (pre->parsed()) return cmd_preprocess(cfg, in_path, out_path);
        if (pt->parsed())
            return cmd_pretrain(cfg, data_path, ckpt_path,
                                log_path.empty() ? ckpt_path + ".loss.csv" : log_path);
        if (ft->parsed())
            return cmd_finetune(cfg, data_path, in_path, ckpt_path,
                                log_path.empty() ? ckpt_path + ".loss.csv" : log_path);
        if (ev->parsed()) return cmd_evaluate(cfg, data_path, ckpt_path, split_name, csv_path);
        if (rb->parsed()) return cmd_robustness(cfg, data_path, ckpt_path, csv_path);
        if (df->parsed()) return cmd_dump_features(cfg, data_path, ckpt_path, index, prefix);
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DatasetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const EdfError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
