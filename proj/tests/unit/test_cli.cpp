#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sfdlm/cli/commands.hpp"
#include "sfdlm/errors.hpp"
#include "sfdlm/numerics/ops.hpp"
#include "sfdlm/text/corpus.hpp"
#include "sfdlm/training/checkpoint.hpp"

using namespace sfdlm;
using namespace sfdlm::cli;
namespace fs = std::filesystem;

namespace {

const std::string kCorpus = std::string(SFDLM_DATA_DIR) + "/corpus.txt";

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sfdlm_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig quick_run(const fs::path& dir) {
    RunConfig c;
    c.corpus = kCorpus;
    c.output_dir = dir.string();
    c.seq_len = 16;
    c.embed_dim = 8;
    c.unet_levels = 1;
    c.blocks_per_level = 1;
    c.ssm_state_dim = 2;
    c.ssm_kernel_len = 4;
    c.fourier_hidden = 16;
    c.diffusion_steps = 4;
    c.batch_size = 4;
    c.total_steps = 6;
    c.warmup_steps = 2;
    c.checkpoint_interval = 3;
    c.eval_interval = 3;
    c.eval_max_windows = 4;
    c.window_stride = 64;
    c.seed = 5;
    return c;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        rows.push_back(cols);
    }
    return rows;
}

// Squares its input but records a backward that forgets the factor 2.
numerics::Tensor broken_square(const numerics::Tensor& x) {
    auto out = numerics::Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.mutable_data()[i] = x.at(i) * x.at(i);
    if (numerics::Tape::active() != nullptr && x.requires_grad()) {
        numerics::Tape::active()->record({x.impl()}, out, [xi = x.impl(), o = out.impl().get()] {
            auto g = xi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * xi->data[i];
        });
    }
    return out;
}

}  // namespace

TEST_CASE("run config: defaults round-trip through JSON") {
    RunConfig c;
    CHECK(parse_run_config(to_json(c)) == c);
    c.betas = std::vector<double>{0.1, 0.2};
    c.fourier_after_ssm = true;
    c.tokenizer = "bpe";
    c.bpe_merges = 30;
    CHECK(parse_run_config(to_json(c)) == c);
}

TEST_CASE("run config: bundled configs load and validate") {
    for (const char* name : {"tiny.json", "default.json"}) {
        const auto c = load_run_config(std::string(SFDLM_CONFIG_DIR) + "/" + name);
        CHECK_NOTHROW(c.validate());
        CHECK_NOTHROW(c.model_config(40).validate());
    }
}

TEST_CASE("run config: rejects unknown keys, wrong types and bad values") {
    CHECK_THROWS_AS(parse_run_config(R"({"seq_lenn": 64})"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"seq_len": "64"})"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"seq_len": -4})"), InputError);
    CHECK_THROWS_AS(parse_run_config("[1, 2]"), InputError);
    CHECK_THROWS_AS(parse_run_config("{"), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"seq_len": 48})").validate(), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"tokenizer": "words"})").validate(), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"heldout_fraction": 1.5})").validate(), InputError);
    CHECK_THROWS_AS(parse_run_config(R"({"betas": [0.1, 1.2]})").validate(), InputError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.json"), InputError);
}

TEST_CASE("run config: overrides") {
    RunConfig c;
    apply_override(c, "lr=0.01");
    apply_override(c, "corpus=other.txt");
    apply_override(c, "betas=[0.2,0.2]");
    apply_override(c, "fourier_after_ssm=true");
    CHECK(c.lr == 0.01);
    CHECK(c.corpus == "other.txt");
    CHECK(c.betas == std::vector<double>{0.2, 0.2});
    CHECK(c.fourier_after_ssm);
    CHECK_THROWS_AS(c.validate(), InputError);
    apply_override(c, "diffusion_steps=2");
    CHECK_NOTHROW(c.validate());
    CHECK(c.schedule().steps() == 2);
    CHECK_THROWS_AS(apply_override(c, "lr"), InputError);
    CHECK_THROWS_AS(apply_override(c, "nope=1"), InputError);
}

TEST_CASE("mask spec parsing") {
    const auto m = parse_mask_spec("0-2,5,7-7", 8);
    CHECK(m == std::vector<bool>{true, true, true, false, false, true, false, true});
    CHECK_THROWS_AS(parse_mask_spec("", 3), InputError);
    CHECK_THROWS_AS(parse_mask_spec("0-8", 8), InputError);
    CHECK_THROWS_AS(parse_mask_spec("5-2", 8), InputError);
    CHECK_THROWS_AS(parse_mask_spec("a-b", 8), InputError);
    CHECK_THROWS_AS(parse_mask_spec("1,,2", 8), InputError);
}

TEST_CASE("escape_line") {
    CHECK(escape_line("a\nb\tc\\") == "a\\nb\\tc\\\\");
}

TEST_CASE("noise-sim: closed form and Monte Carlo columns") {
    std::ostringstream out, err;

    RunConfig clean;
    clean.diffusion_steps = 3;
    clean.betas = std::vector<double>{0.0, 0.0, 0.0};
    REQUIRE(cmd_noise_sim(clean, 1000, 10, out, err) == kExitOk);
    auto rows = csv_rows(out.str());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][0] == "t");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(std::stod(rows[i][3]) == 1.0);
        CHECK(std::stod(rows[i][4]) == 1.0);
    }

    RunConfig half;
    half.diffusion_steps = 2;
    half.betas = std::vector<double>{0.5, 0.5};
    out.str("");
    REQUIRE(cmd_noise_sim(half, 100000, 4, out, err) == kExitOk);
    rows = csv_rows(out.str());
    CHECK(std::abs(std::stod(rows[2][3]) - 0.4375) < 1e-12);

    out.str("");
    REQUIRE(cmd_noise_sim(RunConfig{}, 100000, 62, out, err) == kExitOk);
    rows = csv_rows(out.str());
    REQUIRE(rows.size() == 9);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][5]) < 3.0 * std::stod(rows[i][6]));

    CHECK(cmd_noise_sim(RunConfig{}, 0, 62, out, err) == kExitInput);
    CHECK(cmd_noise_sim(RunConfig{}, 10, 1, out, err) == kExitInput);
}

TEST_CASE("grad-check suite reports a broken backward by name") {
    auto cases = grad_check_cases();
    cases.push_back({"broken_square", [] {
                         std::vector<numerics::Tensor> in{
                             numerics::Tensor::from({3}, {0.5, -1.0, 2.0}, true)};
                         return numerics::check_gradients([&] { return numerics::sum(broken_square(in[0])); }, in);
                     }});
    std::ostringstream out;
    CHECK(run_grad_check_suite(cases, out) == kExitFailure);
    const auto text = out.str();
    CHECK(text.find("FAIL broken_square") != std::string::npos);
    CHECK(text.find("FAIL add ") == std::string::npos);
    CHECK(text.find("grad-check: " + std::to_string(cases.size() - 1) + "/" + std::to_string(cases.size())) !=
          std::string::npos);
}

TEST_CASE("train: missing corpus is an input error") {
    auto c = quick_run(scratch("missing"));
    c.corpus = "/nonexistent/corpus.txt";
    std::ostringstream out, err;
    CHECK(guarded([&] { return cmd_train(c, {}, out, err); }, err) == kExitInput);
    CHECK(err.str().find("corpus") != std::string::npos);
}

TEST_CASE("train: outputs, first loss ln V, seeded determinism") {
    const auto a = scratch("train_a"), b = scratch("train_b");
    std::ostringstream out, err;
    REQUIRE(cmd_train(quick_run(a), {}, out, err) == kExitOk);
    REQUIRE(cmd_train(quick_run(b), {}, out, err) == kExitOk);

    for (const char* f : {"config.json", "vocab.json", "metrics.csv", "timing.csv", "eval.csv", "checkpoint.bin",
                          "checkpoint_000003.bin", "checkpoint_000006.bin"})
        CHECK(fs::exists(a / f));

    const auto ck = training::load_checkpoint((a / "checkpoint.bin").string());
    CHECK(ck.global_step == 6);
    const auto rows = csv_rows(slurp(a / "metrics.csv"));
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] == std::vector<std::string>{"step", "t_mean", "loss", "lr"});
    CHECK(std::abs(std::stod(rows[1][2]) - std::log(static_cast<double>(ck.vocab.size()))) < 1e-9);

    for (const char* f : {"metrics.csv", "eval.csv", "checkpoint.bin", "checkpoint_000003.bin", "vocab.json"})
        CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("train: resume continues bit-exactly and rejects a different config") {
    const auto full = scratch("resume_full"), part = scratch("resume_part");
    std::ostringstream out, err;
    REQUIRE(cmd_train(quick_run(full), {}, out, err) == kExitOk);
    auto half = quick_run(part);
    half.total_steps = 3;
    REQUIRE(cmd_train(half, {}, out, err) == kExitOk);
    const auto mid = (part / "checkpoint_000003.bin").string();
    REQUIRE(cmd_train(quick_run(part), {mid}, out, err) == kExitOk);
    CHECK(slurp(full / "checkpoint.bin") == slurp(part / "checkpoint.bin"));
    CHECK(slurp(full / "metrics.csv") == slurp(part / "metrics.csv"));

    auto other = quick_run(scratch("resume_bad"));
    other.embed_dim = 16;
    CHECK(guarded([&] { return cmd_train(other, {mid}, out, err); }, err) == kExitInput);
}

TEST_CASE("generate and inpaint commands") {
    const auto dir = scratch("sample");
    std::ostringstream out, err;
    REQUIRE(cmd_train(quick_run(dir), {}, out, err) == kExitOk);
    const auto ck_path = (dir / "checkpoint.bin").string();

    SampleOptions opt;
    opt.checkpoint = ck_path;
    opt.seed = 3;
    opt.trace_path = (dir / "trace.txt").string();
    std::ostringstream g1, g2;
    REQUIRE(cmd_generate(opt, g1, err) == kExitOk);
    const auto trace = slurp(dir / "trace.txt");
    REQUIRE(cmd_generate(opt, g2, err) == kExitOk);
    CHECK(g1.str() == g2.str());
    CHECK(trace == slurp(dir / "trace.txt"));
    CHECK(trace.rfind("t=4\t", 0) == 0);

    opt.length = 32;
    CHECK(cmd_generate(opt, g1, err) == kExitInput);
    opt.length = 0;
    opt.temperature = -1.0;
    CHECK(cmd_generate(opt, g1, err) == kExitInput);
    opt.temperature = 1.0;
    opt.checkpoint = (dir / "missing.bin").string();
    CHECK(cmd_generate(opt, g1, err) == kExitInput);
    opt.checkpoint = ck_path;

    const auto prompt = dir / "prompt.txt";
    std::ofstream(prompt) << "the quick brown ";
    std::ostringstream inp;
    REQUIRE(cmd_inpaint(opt, prompt.string(), "0-7", inp, err) == kExitOk);
    CHECK(inp.str().substr(0, 8) == "the quic");
    std::istringstream lines(slurp(dir / "trace.txt"));
    std::size_t states = 0;
    for (std::string line; std::getline(lines, line); ++states)
        CHECK(line.substr(line.find('\t') + 1, 8) == "the quic");
    CHECK(states == 5);

    CHECK(cmd_inpaint(opt, prompt.string(), "0-16", inp, err) == kExitInput);
    std::ofstream(prompt) << "short";
    CHECK(cmd_inpaint(opt, prompt.string(), "0-9", inp, err) == kExitInput);
    CHECK(cmd_inpaint(opt, prompt.string(), "0-4", inp, err) == kExitOk);
}

TEST_CASE("eval command prints per-step cross-entropy") {
    const auto dir = scratch("eval");
    std::ostringstream out, err;
    auto c = quick_run(dir);
    REQUIRE(cmd_train(c, {}, out, err) == kExitOk);
    std::ostringstream e;
    REQUIRE(cmd_eval((dir / "checkpoint.bin").string(), c, e, err) == kExitOk);
    CHECK(e.str().find("t=3 ce=") != std::string::npos);
    CHECK(e.str().find("mean_ce=") != std::string::npos);
}

TEST_CASE("trained tiny model: held-out CE grows with t, one inversion allowed") {
    auto c = load_run_config(std::string(SFDLM_CONFIG_DIR) + "/tiny.json");
    c.corpus = kCorpus;
    c.output_dir = scratch("monotone").string();
    c.total_steps = 400;
    c.eval_interval = 400;
    c.checkpoint_interval = 400;
    std::ostringstream out, err;
    REQUIRE(cmd_train(c, {}, out, err) == kExitOk);
    std::vector<double> ce;
    for (const auto& row : csv_rows(slurp(fs::path(c.output_dir) / "eval.csv")))
        if (row[0] == "400") ce.push_back(std::stod(row[2]));
    REQUIRE(ce.size() == c.diffusion_steps);
    std::size_t inversions = 0;
    for (std::size_t t = 1; t < ce.size(); ++t) inversions += ce[t] < ce[t - 1];
    CHECK(inversions <= 1);
}

TEST_CASE("default config: first logged loss is ln V") {
    auto c = load_run_config(std::string(SFDLM_CONFIG_DIR) + "/default.json");
    c.corpus = kCorpus;
    c.output_dir = scratch("default").string();
    c.total_steps = 1;
    c.warmup_steps = 1;
    std::ostringstream out, err;
    REQUIRE(cmd_train(c, {}, out, err) == kExitOk);
    const auto vocab = text::Vocab::load((fs::path(c.output_dir) / "vocab.json").string());
    const auto rows = csv_rows(slurp(fs::path(c.output_dir) / "metrics.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(std::abs(std::stod(rows[1][2]) - std::log(static_cast<double>(vocab.size()))) < 1e-9);
}
