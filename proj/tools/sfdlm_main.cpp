#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfdlm/cli/commands.hpp"
#include "sfdlm/errors.hpp"
#include "sfdlm/text/corpus.hpp"

using namespace sfdlm;
using namespace sfdlm::cli;

namespace {

struct ConfigFlags {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::vector<std::string> overrides;

    void attach(CLI::App* app, bool with_output = false) {
        app->add_option("-c,--config", path, "JSON run config");
        app->add_option("--seed", seed, "Override the config seed");
        app->add_option("--set", overrides, "Override one config key: key=value (repeatable)");
        if (with_output) app->add_option("-o,--output", output, "Override output_dir");
    }

    RunConfig resolve() const {
        RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
        for (const auto& o : overrides) apply_override(c, o);
        if (seed) c.seed = *seed;
        if (output) c.output_dir = *output;
        c.validate();
        return c;
    }
};

void attach_sampling(CLI::App* app, SampleOptions& o) {
    app->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    app->add_option("-t,--temperature", o.temperature, "Sampling temperature (0 = argmax)");
    app->add_option("--seed", o.seed, "Sampling seed");
    app->add_option("-n,--length", o.length, "Sequence length (must equal the model's)");
    app->add_option("--trace", o.trace_path, "Write every reverse step to this file");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-Fourier discrete diffusion language model"};
    app.require_subcommand(1);

    ConfigFlags train_flags, eval_flags, noise_flags;
    TrainOptions train_opts;
    auto* train = app.add_subcommand("train", "Train a model on the configured corpus");
    train_flags.attach(train, true);
    train->add_option("--resume", train_opts.resume, "Continue from a checkpoint");

    std::string eval_ckpt;
    auto* eval = app.add_subcommand("eval", "Per-step denoising cross-entropy on held-out text");
    eval_flags.attach(eval);
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();

    SampleOptions gen_opts;
    auto* generate = app.add_subcommand("generate", "Sample text from noise");
    attach_sampling(generate, gen_opts);

    SampleOptions inp_opts;
    std::string prompt_path, mask_spec;
    auto* inpaint = app.add_subcommand("inpaint", "Regenerate the unfrozen part of a prompt");
    attach_sampling(inpaint, inp_opts);
    inpaint->add_option("--prompt", prompt_path, "Prompt text file")->required();
    inpaint->add_option("--mask", mask_spec, "Frozen positions, e.g. 0-63,100-127")->required();

    std::size_t samples = 100000, vocab_size = 0;
    auto* noise = app.add_subcommand("noise-sim", "Closed-form vs Monte Carlo forward-process match rates");
    noise_flags.attach(noise);
    noise->add_option("--samples", samples, "Monte Carlo positions");
    noise->add_option("--vocab-size", vocab_size, "Vocabulary size (default: char vocabulary of the corpus)");

    auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    if (*train) {
        return guarded([&] { return cmd_train(train_flags.resolve(), train_opts, std::cout, std::cerr); }, std::cerr);
    }
    if (*eval) return guarded([&] { return cmd_eval(eval_ckpt, eval_flags.resolve(), std::cout, std::cerr); }, std::cerr);
    if (*generate) return cmd_generate(gen_opts, std::cout, std::cerr);
    if (*inpaint) return cmd_inpaint(inp_opts, prompt_path, mask_spec, std::cout, std::cerr);
    if (*noise) {
        return guarded(
            [&] {
                auto c = noise_flags.resolve();
                auto v = vocab_size;
                if (v == 0) v = text::build_char_vocab(text::read_corpus(c.corpus)).size();
                return cmd_noise_sim(c, samples, v, std::cout, std::cerr);
            },
            std::cerr);
    }
    if (*grad) return cmd_grad_check(std::cout, std::cerr);
    return kExitFailure;
}
