#include "sfdlm/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sfdlm/diffusion/forward.hpp"
#include "sfdlm/errors.hpp"
#include "sfdlm/sampling/sampler.hpp"
#include "sfdlm/text/corpus.hpp"
#include "sfdlm/training/checkpoint.hpp"

namespace sfdlm::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kNoiseSimStream = 0x0153;

struct PreparedData {
    text::Vocab vocab;
    std::vector<TokenSequence> train;
    std::vector<TokenSequence> heldout;
};

PreparedData prepare_data(const RunConfig& c, const text::Vocab* fixed_vocab) {
    const auto corpus = text::read_corpus(c.corpus);
    PreparedData d;
    if (fixed_vocab != nullptr) {
        d.vocab = *fixed_vocab;
    } else {
        d.vocab = c.tokenizer == "bpe" ? text::bpe_train(corpus, c.bpe_merges) : text::build_char_vocab(corpus);
    }
    if (d.vocab.size() < 2) throw InputError("corpus yields fewer than 2 distinct tokens");
    const auto ids = text::encode(corpus, d.vocab);
    const auto split = text::split_tokens(ids, c.heldout_fraction);
    d.train = text::make_windows(split.train, c.seq_len, c.window_stride);
    d.heldout = text::make_windows(split.heldout, c.seq_len, c.seq_len);
    if (d.train.empty())
        throw InputError("corpus " + c.corpus + " is too short for one training window of " +
                         std::to_string(c.seq_len) + " tokens");
    if (d.heldout.empty())
        throw InputError("held-out split of " + c.corpus + " is shorter than one window of " +
                         std::to_string(c.seq_len) + " tokens");
    if (d.heldout.size() > c.eval_max_windows) d.heldout.resize(c.eval_max_windows);
    return d;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
}

std::string checkpoint_name(std::uint64_t step) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "checkpoint_%06llu.bin", static_cast<unsigned long long>(step));
    return buf;
}

void print_eval(std::ostream& out, std::uint64_t step, const training::EvalResult& r) {
    out << "eval step " << step << "\n";
    for (std::size_t t = 0; t < r.ce_per_step.size(); ++t)
        out << "  t=" << t << " ce=" << std::setprecision(6) << r.ce_per_step[t] << "\n";
    out << "  mean_ce=" << r.mean_ce << " denoising_perplexity=" << r.denoising_perplexity
        << " (denoising metric, not autoregressive perplexity)\n";
}

void write_trace(const std::string& path, const sampling::SampleResult& result, const text::Vocab& vocab) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write trace file " + path);
    const std::size_t steps = result.trace.size() - 1;
    for (std::size_t k = 0; k < result.trace.size(); ++k)
        out << "t=" << steps - k << "\t" << escape_line(text::decode(result.trace[k], vocab)) << "\n";
}

TokenSequence read_prompt(const std::string& path, const text::Vocab& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read prompt file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text::encode(text, vocab);
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "unexpected failure: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            config.validate();
            std::optional<training::Checkpoint> resumed;
            if (options.resume) resumed = training::load_checkpoint(*options.resume);
            const auto data = prepare_data(config, resumed ? &resumed->vocab : nullptr);
            const auto model_cfg = config.model_config(data.vocab.size());
            const auto schedule = config.schedule();
            const auto train_cfg = config.train_config();

            model::Model model = resumed ? std::move(resumed->model) : model::Model(model_cfg, config.seed);
            auto optimizer = resumed ? resumed->optimizer : training::make_optimizer(model, train_cfg.optimizer());
            const std::uint64_t start = resumed ? resumed->global_step : 0;
            if (resumed) {
                if (!(model.config() == model_cfg)) throw InputError("checkpoint model config differs from the run config");
                if (!(resumed->schedule == schedule)) throw InputError("checkpoint noise schedule differs from the run config");
                if (!(optimizer.config == train_cfg.optimizer()))
                    throw InputError("checkpoint optimizer settings differ from the run config");
            }

            const fs::path dir(config.output_dir);
            fs::create_directories(dir);
            write_file(dir / "config.json", to_json(config));
            write_file(dir / "vocab.json", data.vocab.to_json());

            const auto mode = resumed ? std::ios::app : std::ios::trunc;
            std::ofstream metrics(dir / "metrics.csv", mode), timing(dir / "timing.csv", mode),
                evals(dir / "eval.csv", mode);
            if (!metrics || !timing || !evals) throw InputError("cannot write logs in " + dir.string());
            if (!resumed) {
                metrics << "step,t_mean,loss,lr\n";
                timing << "step,wallclock_s\n";
                evals << "step,t,ce\n";
            }

            out << "vocab " << data.vocab.size() << " tokens, " << data.train.size() << " training windows, "
                << data.heldout.size() << " held-out windows, " << model.parameter_count() << " parameters\n";

            training::Trainer trainer(model, optimizer, schedule, train_cfg, data.train, start);
            const auto t0 = std::chrono::steady_clock::now();
            auto run_eval = [&](std::uint64_t step) {
                auto r = training::evaluate(model, data.heldout, schedule, config.seed);
                for (std::size_t t = 0; t < r.ce_per_step.size(); ++t)
                    evals << step << "," << t << "," << num(r.ce_per_step[t]) << "\n";
                evals.flush();
                return r;
            };
            while (trainer.global_step() < config.total_steps) {
                const auto r = trainer.step();
                const auto step = trainer.global_step();
                if (step % config.log_interval == 0 || step == 1) {
                    metrics << step << "," << num(r.t_mean) << "," << num(r.loss) << "," << num(r.lr) << "\n";
                    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
                    timing << step << "," << elapsed.count() << "\n";
                }
                if (step % config.checkpoint_interval == 0)
                    training::save_checkpoint((dir / checkpoint_name(step)).string(), model, data.vocab, schedule,
                                              optimizer, step);
                if (step % config.eval_interval == 0 && step != config.total_steps) {
                    const auto r_eval = run_eval(step);
                    out << "step " << step << " loss " << std::setprecision(6) << r.loss << " eval mean_ce "
                        << r_eval.mean_ce << "\n";
                }
            }
            metrics.flush();
            timing.flush();
            training::save_checkpoint((dir / "checkpoint.bin").string(), model, data.vocab, schedule, optimizer,
                                      trainer.global_step());
            print_eval(out, trainer.global_step(), run_eval(trainer.global_step()));
            return kExitOk;
        },
        err);
}

int cmd_eval(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            auto ck = training::load_checkpoint(checkpoint);
            auto c = config;
            c.seq_len = ck.model.config().seq_len;
            const auto data = prepare_data(c, &ck.vocab);
            print_eval(out, ck.global_step, training::evaluate(ck.model, data.heldout, ck.schedule, config.seed));
            return kExitOk;
        },
        err);
}

int cmd_generate(const SampleOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            auto ck = training::load_checkpoint(options.checkpoint);
            sampling::ModelDenoiser denoiser(ck.model);
            sampling::SampleRequest req;
            req.length = options.length == 0 ? denoiser.seq_len() : options.length;
            req.temperature = options.temperature;
            req.seed = options.seed;
            req.keep_trace = options.trace_path.has_value();
            const auto result = sampling::generate(denoiser, req);
            if (options.trace_path) write_trace(*options.trace_path, result, ck.vocab);
            out << text::decode(result.tokens, ck.vocab) << "\n";
            return kExitOk;
        },
        err);
}

std::vector<bool> parse_mask_spec(const std::string& spec, std::size_t length) {
    std::vector<bool> mask(length, false);
    std::stringstream ss(spec);
    std::string part;
    auto parse_pos = [&](const std::string& s) -> std::size_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw InputError("mask spec '" + spec + "': '" + s + "' is not a position");
        const auto v = std::stoull(s);
        if (v >= length)
            throw InputError("mask spec '" + spec + "': position " + s + " outside [0, " + std::to_string(length) + ")");
        return static_cast<std::size_t>(v);
    };
    while (std::getline(ss, part, ',')) {
        const auto dash = part.find('-');
        const auto a = parse_pos(part.substr(0, dash));
        const auto b = dash == std::string::npos ? a : parse_pos(part.substr(dash + 1));
        if (b < a) throw InputError("mask spec '" + spec + "': range " + part + " is reversed");
        for (auto i = a; i <= b; ++i) mask[i] = true;
    }
    if (spec.empty() || spec.back() == ',') throw InputError("mask spec '" + spec + "' is empty or ends with ','");
    return mask;
}

int cmd_inpaint(const SampleOptions& options, const std::string& prompt_path, const std::string& mask_spec,
                std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            auto ck = training::load_checkpoint(options.checkpoint);
            sampling::ModelDenoiser denoiser(ck.model);
            const std::size_t n = denoiser.seq_len();
            if (options.length != 0 && options.length != n)
                throw InputError("length must equal the model sequence length " + std::to_string(n));
            auto prompt = read_prompt(prompt_path, ck.vocab);
            if (prompt.size() > n)
                throw InputError("prompt has " + std::to_string(prompt.size()) + " tokens, model length is " +
                                 std::to_string(n));
            const auto mask = parse_mask_spec(mask_spec, n);
            for (std::size_t i = prompt.size(); i < n; ++i)
                if (mask[i])
                    throw InputError("frozen position " + std::to_string(i) + " lies past the end of the " +
                                     std::to_string(prompt.size()) + "-token prompt");
            prompt.resize(n, 0);

            sampling::SampleRequest req;
            req.length = n;
            req.temperature = options.temperature;
            req.seed = options.seed;
            req.mode = sampling::SampleMode::inpaint;
            req.prompt = prompt;
            req.freeze_mask = mask;
            req.keep_trace = options.trace_path.has_value();
            const auto result = sampling::inpaint(denoiser, req);
            if (options.trace_path) write_trace(*options.trace_path, result, ck.vocab);
            out << text::decode(result.tokens, ck.vocab) << "\n";
            return kExitOk;
        },
        err);
}

int cmd_noise_sim(const RunConfig& config, std::size_t samples, std::size_t vocab_size, std::ostream& out,
                  std::ostream& err) {
    return guarded(
        [&] {
            config.validate();
            if (samples == 0) throw InputError("samples must be positive");
            if (vocab_size < 2) throw InputError("vocab size must be at least 2");
            const auto schedule = config.schedule();
            Rng rng(config.seed, kNoiseSimStream);
            TokenSequence x0(samples);
            for (auto& v : x0) v = static_cast<TokenId>(rng.below(vocab_size));
            auto x = x0;
            out << "t,beta,survival,closed_form_match,monte_carlo_match,abs_deviation,sigma\n";
            for (std::size_t t = 1; t <= schedule.steps(); ++t) {
                x = diffusion::forward_step(x, schedule.beta(t - 1), rng, vocab_size).tokens;
                std::size_t same = 0;
                for (std::size_t i = 0; i < samples; ++i) same += x[i] == x0[i];
                const double closed = diffusion::match_probability(diffusion::marginal_survival(schedule, t), vocab_size);
                const double mc = static_cast<double>(same) / static_cast<double>(samples);
                const double sigma = std::sqrt(closed * (1.0 - closed) / static_cast<double>(samples));
                out << t << "," << num(schedule.beta(t - 1)) << "," << num(schedule.survival()[t - 1]) << ","
                    << num(closed) << "," << num(mc) << "," << num(std::abs(mc - closed)) << "," << num(sigma) << "\n";
            }
            return kExitOk;
        },
        err);
}

int run_grad_check_suite(const std::vector<GradCheckCase>& cases, std::ostream& out) {
    std::size_t passed = 0;
    for (const auto& c : cases) {
        const auto r = c.run();
        const bool ok = r.max_relative_error < kGradCheckTolerance && std::isfinite(r.max_relative_error);
        passed += ok;
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %-28s max_rel_err=%.3e coords=%zu", ok ? "PASS" : "FAIL", c.name.c_str(),
                      r.max_relative_error, r.coordinates);
        out << line;
        if (!ok)
            out << " worst(input=" << r.worst_input << ", index=" << r.worst_index << ", analytic=" << r.worst_analytic
                << ", numeric=" << r.worst_numeric << ")";
        out << "\n";
    }
    out << "grad-check: " << passed << "/" << cases.size() << " passed (tolerance " << kGradCheckTolerance << ")\n";
    return passed == cases.size() ? kExitOk : kExitFailure;
}

int cmd_grad_check(std::ostream& out, std::ostream& err) {
    return guarded([&] { return run_grad_check_suite(grad_check_cases(), out); }, err);
}

std::string escape_line(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            case '\\': out += "\\\\"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace sfdlm::cli
