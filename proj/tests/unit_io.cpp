#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cria/checkpoint.hpp"
#include "cria/config.hpp"
#include "cria/dataset.hpp"
#include "cria/edf.hpp"
#include "cria/finetune.hpp"
#include "helpers.hpp"

using namespace cria;
using namespace cria::testing;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("cria_io_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spew(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SegmentedSlice random_seg(int c, int n, int d, Rng& rng) {
    SegmentedSlice s;
    s.channels = c;
    s.segments = n;
    s.segment_len = d;
    s.data.resize(static_cast<std::size_t>(c) * n * d);
    for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
    s.channel_ids.resize(c);
    for (int i = 0; i < c; ++i) s.channel_ids[i] = i;
    return s;
}

}  // namespace

TEST_CASE("edf writer and parser round-trip within half a quantization step") {
    Rng rng(91);
    EegRecording rec;
    rec.sample_rate = 100.0;
    rec.channel_names = {"FP1", "CZ"};
    rec.data.assign(2, std::vector<double>(300));
    for (auto& ch : rec.data)
        for (double& v : ch) v = rng.uniform(-120.0, 150.0);

    const auto path = tmp_path("roundtrip.edf");
    write_edf(path.string(), rec);
    const EegRecording back = parse_edf(path.string());

    CHECK(back.channels() == 2);
    CHECK(back.samples() == 300);
    CHECK(back.sample_rate == doctest::Approx(100.0));
    CHECK(back.channel_names[0] == "FP1");
    for (int c = 0; c < 2; ++c) {
        double lo = rec.data[c][0], hi = rec.data[c][0];
        for (double v : rec.data[c]) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double half_step = (hi - lo) / 65535.0 / 2.0;
        for (std::size_t i = 0; i < 300; ++i)
            CHECK(std::fabs(back.data[c][i] - rec.data[c][i]) <= half_step * (1.0 + 1e-9));
    }
    std::filesystem::remove(path);
}

TEST_CASE("edf parser fails closed on malformed files") {
    Rng rng(92);
    EegRecording rec;
    rec.sample_rate = 50.0;
    rec.channel_names = {"A"};
    rec.data.assign(1, std::vector<double>(100));
    for (double& v : rec.data[0]) v = rng.uniform(-1.0, 1.0);
    const auto path = tmp_path("bad.edf");
    write_edf(path.string(), rec);
    const std::string good = slurp(path);

    spew(path, good.substr(0, 100));  // truncated fixed header
    CHECK_THROWS_AS(parse_edf(path.string()), EdfError);

    spew(path, good.substr(0, 400));  // truncated signal header
    CHECK_THROWS_AS(parse_edf(path.string()), EdfError);

    spew(path, good.substr(0, good.size() - 10));  // truncated data record
    CHECK_THROWS_AS(parse_edf(path.string()), EdfError);

    std::string bad_count = good;
    for (int i = 0; i < 8; ++i) bad_count[184 + i] = ' ';  // blank header-size field
    spew(path, bad_count);
    CHECK_THROWS_AS(parse_edf(path.string()), EdfError);

    CHECK_THROWS_AS(parse_edf(tmp_path("missing.edf").string()), EdfError);
    std::filesystem::remove(path);
}

TEST_CASE("slice dataset round-trips and rejects corruption") {
    Rng rng(93);
    SliceDataset ds;
    ds.channels = 3;
    ds.slice_len = 40;
    ds.sample_rate = 200.0;
    ds.num_classes = 2;
    ds.channel_names = {"C0", "C1", "C2"};
    for (int i = 0; i < 5; ++i) {
        EegSlice s;
        s.channel_names = ds.channel_names;
        s.data.assign(3, std::vector<double>(40));
        for (auto& ch : s.data)
            for (double& v : ch) v = rng.uniform(-2.0, 2.0);
        ds.append(s, i % 2);
    }

    const auto path = tmp_path("ds.bin");
    save_dataset(path.string(), ds);
    const SliceDataset back = load_dataset(path.string());
    CHECK(back.size() == 5);
    CHECK(back.channels == 3);
    CHECK(back.slice_len == 40);
    CHECK(back.num_classes == 2);
    CHECK(back.channel_names == ds.channel_names);
    CHECK(back.labels == ds.labels);
    CHECK(back.samples == ds.samples);  // float32 payload is bit-exact

    // slice() reproduces the appended values at float32 precision
    const EegSlice s0 = back.slice(0);
    CHECK(s0.data[1][7] == doctest::Approx(static_cast<double>(ds.samples[1 * 40 + 7])));

    std::string bytes = slurp(path);
    std::string corrupt = bytes;
    corrupt[0] = 'X';  // magic
    spew(path, corrupt);
    CHECK_THROWS_AS(load_dataset(path.string()), DatasetError);

    spew(path, bytes.substr(0, bytes.size() - 3));  // short payload
    CHECK_THROWS_AS(load_dataset(path.string()), DatasetError);

    spew(path, bytes + "zz");  // trailing garbage
    CHECK_THROWS_AS(load_dataset(path.string()), DatasetError);

    corrupt = bytes;
    corrupt[4] = 99;  // version
    spew(path, corrupt);
    CHECK_THROWS_AS(load_dataset(path.string()), DatasetError);
    std::filesystem::remove(path);
}

TEST_CASE("seeded splits are deterministic, disjoint, and exhaustive") {
    const auto a = split_dataset(100, 0.8, 0.1, 7);
    const auto b = split_dataset(100, 0.8, 0.1, 7);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == 80);
    CHECK(a.val.size() == 10);
    CHECK(a.test.size() == 10);
    std::vector<char> seen(100, 0);
    for (const auto* part : {&a.train, &a.val, &a.test})
        for (std::size_t i : *part) {
            CHECK(!seen[i]);
            seen[i] = 1;
        }
    const auto c = split_dataset(100, 0.8, 0.1, 8);
    CHECK(a.train != c.train);
}

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.c_max = 4;
    Rng init(11);
    ModelParams model = init_model(cfg, init);
    HeadParams head = init_head(cfg.dim, 16, 3, 0.1, init);

    AdamConfig acfg;
    acfg.lr = 5e-4;
    Adam opt(acfg);
    model.visit([&](const std::string& n, Tensor& t) { opt.attach(n, t); });
    head.visit([&](const std::string& n, Tensor& t) { opt.attach(n, t); });

    // one real training step so the moments are non-trivial
    Rng rng(12);
    Rng data_rng(13);
    std::vector<SegmentedSlice> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_seg(3, 4, cfg.dim, data_rng));
    finetune_step(model, head, opt, batch, {0, 1, 2}, rng);

    const auto p1 = tmp_path("ck1.bin"), p2 = tmp_path("ck2.bin");
    save_checkpoint(p1.string(), model, &head, &opt, rng, 1);
    LoadedCheckpoint ck = load_checkpoint(p1.string());
    CHECK(ck.step == 1);
    CHECK(ck.opt_steps == 1);
    CHECK(ck.head.has_value());
    CHECK(ck.rng_state == rng.state());
    Adam opt2 = restore_optimizer(ck);
    Rng rng2(0);
    rng2.set_state(ck.rng_state);
    save_checkpoint(p2.string(), ck.model, &*ck.head, &opt2, rng2, ck.step);
    CHECK(slurp(p1) == slurp(p2));

    // loaded parameters drive the same forward pass bitwise
    Tape::Pause pause;
    const Tensor a = predict_scores(batch, model, head);
    const Tensor b = predict_scores(batch, ck.model, *ck.head);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);

    // headless, optimizer-less save still round-trips
    const auto p3 = tmp_path("ck3.bin");
    save_checkpoint(p3.string(), model, nullptr, nullptr, rng, 0);
    LoadedCheckpoint bare = load_checkpoint(p3.string());
    CHECK(!bare.head.has_value());
    CHECK(bare.opt_slots.empty());

    std::string bytes = slurp(p1);
    bytes[4] = 99;  // version
    spew(p1, bytes);
    CHECK_THROWS_AS(load_checkpoint(p1.string()), CheckpointError);
    bytes[4] = 1;
    bytes[0] = 'x';  // magic
    spew(p1, bytes);
    CHECK_THROWS_AS(load_checkpoint(p1.string()), CheckpointError);
    spew(p1, slurp(p2) + "y");  // trailing bytes
    CHECK_THROWS_AS(load_checkpoint(p1.string()), CheckpointError);
    for (const auto& p : {p1, p2, p3}) std::filesystem::remove(p);
}

TEST_CASE("config precedence: flag beats file beats default") {
    Config cfg;
    cfg.define("alpha", "1", "first knob");
    cfg.define("beta", "x", "second knob");
    cfg.define("gamma", "0.5", "third knob");
    cfg.define("flag", "true", "a switch");

    const auto path = tmp_path("conf.cfg");
    spew(path, "# comment line\nalpha = 2\n\nbeta=file\n");
    cfg.load_file(path.string());
    cfg.set_flag("alpha", "3");

    CHECK(cfg.get_int("alpha") == 3);       // flag wins
    CHECK(cfg.get("beta") == "file");       // file beats default
    CHECK(cfg.get_double("gamma") == 0.5);  // untouched default
    CHECK(cfg.get_bool("flag"));
    CHECK(cfg.overridden("alpha"));
    CHECK(cfg.overridden("beta"));
    CHECK(!cfg.overridden("gamma"));

    CHECK_THROWS_AS(cfg.get("nope"), ConfigError);
    CHECK_THROWS_AS(cfg.set_flag("nope", "1"), ConfigError);
    spew(path, "alpha=1\nmystery=2\n");
    try {
        cfg.load_file(path.string());
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("mystery") != std::string::npos);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
    }
    CHECK_THROWS_AS(cfg.get_int("beta"), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("rng substreams are deterministic and independent of draw order") {
    Rng a(42), b(42);
    // drawing from the parent does not move its substreams
    a.next_u64();
    a.next_u64();
    Rng s1 = a.substream("model-init");
    Rng s2 = b.substream("model-init");
    for (int i = 0; i < 8; ++i) CHECK(s1.next_u64() == s2.next_u64());
    // different names give different streams
    Rng s3 = b.substream("head-init");
    CHECK(s3.next_u64() != b.substream("model-init").next_u64());
    // different seeds give different streams
    CHECK(Rng(43).substream("model-init").next_u64() != Rng(42).substream("model-init").next_u64());
}
