#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfdlm/cli/run_config.hpp"
#include "sfdlm/numerics/grad_check.hpp"

namespace sfdlm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Runs `body`, mapping InputError / invalid_argument / out_of_range to 2,
/// NumericalError to 3 and anything else to 1. Messages go to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

struct TrainOptions {
    /// Continue from this checkpoint instead of a fresh model.
    std::optional<std::string> resume;
};

/// Writes into config.output_dir: config.json, vocab.json, metrics.csv
/// (step,t_mean,loss,lr), timing.csv (step,wallclock_s), eval.csv
/// (step,t,ce), checkpoint_<step>.bin at each interval and checkpoint.bin at
/// the end. Prints the final evaluation.
int cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out, std::ostream& err);

/// Per-step held-out denoising CE of a checkpoint on config's corpus split.
int cmd_eval(const std::string& checkpoint, const RunConfig& config, std::ostream& out, std::ostream& err);

struct SampleOptions {
    std::string checkpoint;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    /// 0 selects the model's sequence length; any other value must equal it.
    std::size_t length = 0;
    std::optional<std::string> trace_path;
};

int cmd_generate(const SampleOptions& options, std::ostream& out, std::ostream& err);

/// Comma-separated inclusive ranges "a-b" (or single positions) of frozen
/// positions, each inside [0, length).
std::vector<bool> parse_mask_spec(const std::string& spec, std::size_t length);

/// The prompt text is encoded and must fit in the model length; shorter
/// prompts leave the tail unfrozen and every frozen position must lie inside
/// the prompt.
int cmd_inpaint(const SampleOptions& options, const std::string& prompt_path, const std::string& mask_spec,
                std::ostream& out, std::ostream& err);

/// CSV: t,beta,survival,closed_form_match,monte_carlo_match,abs_deviation,sigma.
int cmd_noise_sim(const RunConfig& config, std::size_t samples, std::size_t vocab_size, std::ostream& out,
                  std::ostream& err);

struct GradCheckCase {
    std::string name;
    std::function<numerics::GradCheckResult()> run;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Finite-difference checks for every differentiable op, model layer and the
/// end-to-end tiny model.
std::vector<GradCheckCase> grad_check_cases();

/// Prints one line per case with its max relative error; returns 0 when every
/// case is below the tolerance and 1 otherwise.
int run_grad_check_suite(const std::vector<GradCheckCase>& cases, std::ostream& out);

int cmd_grad_check(std::ostream& out, std::ostream& err);

/// Decoded text with newlines, tabs and backslashes escaped, for trace files.
std::string escape_line(const std::string& text);

}  // namespace sfdlm::cli
