#include "sfdlm/cli/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "sfdlm/errors.hpp"

namespace sfdlm::cli {

namespace {

using nlohmann::json;

struct Field {
    const char* name;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

template <class T>
Field field(const char* name, T RunConfig::*member) {
    return {name, [member](const RunConfig& c) { return json(c.*member); },
            [member, name](RunConfig& c, const json& v) {
                if constexpr (std::is_same_v<T, bool>) {
                    if (!v.is_boolean()) throw InputError(std::string("config key '") + name + "' must be a boolean");
                } else if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_unsigned())
                        throw InputError(std::string("config key '") + name + "' must be a nonnegative integer");
                } else if constexpr (std::is_floating_point_v<T>) {
                    if (!v.is_number()) throw InputError(std::string("config key '") + name + "' must be a number");
                } else {
                    if (!v.is_string()) throw InputError(std::string("config key '") + name + "' must be a string");
                }
                c.*member = v.get<T>();
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = {
        field("seq_len", &RunConfig::seq_len),
        field("embed_dim", &RunConfig::embed_dim),
        field("unet_levels", &RunConfig::unet_levels),
        field("blocks_per_level", &RunConfig::blocks_per_level),
        field("ssm_state_dim", &RunConfig::ssm_state_dim),
        field("ssm_kernel_len", &RunConfig::ssm_kernel_len),
        field("fourier_hidden", &RunConfig::fourier_hidden),
        field("fourier_after_ssm", &RunConfig::fourier_after_ssm),
        field("diffusion_steps", &RunConfig::diffusion_steps),
        field("beta_start", &RunConfig::beta_start),
        field("beta_end", &RunConfig::beta_end),
        Field{"betas",
              [](const RunConfig& c) { return c.betas ? json(*c.betas) : json(nullptr); },
              [](RunConfig& c, const json& v) {
                  if (v.is_null()) {
                      c.betas.reset();
                      return;
                  }
                  if (!v.is_array()) throw InputError("config key 'betas' must be an array of numbers or null");
                  std::vector<double> b;
                  for (const auto& e : v) {
                      if (!e.is_number()) throw InputError("config key 'betas' must hold numbers");
                      b.push_back(e.get<double>());
                  }
                  c.betas = std::move(b);
              }},
        field("tokenizer", &RunConfig::tokenizer),
        field("bpe_merges", &RunConfig::bpe_merges),
        field("corpus", &RunConfig::corpus),
        field("output_dir", &RunConfig::output_dir),
        field("heldout_fraction", &RunConfig::heldout_fraction),
        field("window_stride", &RunConfig::window_stride),
        field("eval_max_windows", &RunConfig::eval_max_windows),
        field("seed", &RunConfig::seed),
        field("batch_size", &RunConfig::batch_size),
        field("total_steps", &RunConfig::total_steps),
        field("lr", &RunConfig::lr),
        field("warmup_steps", &RunConfig::warmup_steps),
        field("weight_decay", &RunConfig::weight_decay),
        field("clip_norm", &RunConfig::clip_norm),
        field("checkpoint_interval", &RunConfig::checkpoint_interval),
        field("eval_interval", &RunConfig::eval_interval),
        field("log_interval", &RunConfig::log_interval),
        field("per_batch_t", &RunConfig::per_batch_t),
    };
    return all;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (key == f.name) return f;
    throw InputError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
    try {
        model_config(2).validate();
        train_config().validate();
        (void)schedule();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (betas && betas->size() != diffusion_steps)
        throw InputError("betas has " + std::to_string(betas->size()) + " entries but diffusion_steps is " +
                         std::to_string(diffusion_steps));
    if (tokenizer != "char" && tokenizer != "bpe") throw InputError("tokenizer must be \"char\" or \"bpe\"");
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw InputError("heldout_fraction must lie in (0, 1)");
    if (window_stride == 0) throw InputError("window_stride must be positive");
    if (eval_max_windows == 0) throw InputError("eval_max_windows must be positive");
    if (log_interval == 0) throw InputError("log_interval must be positive");
    if (corpus.empty()) throw InputError("corpus path is empty");
    if (output_dir.empty()) throw InputError("output_dir is empty");
}

model::ModelConfig RunConfig::model_config(std::size_t vocab_size) const {
    model::ModelConfig m;
    m.vocab_size = vocab_size;
    m.seq_len = seq_len;
    m.embed_dim = embed_dim;
    m.unet_levels = unet_levels;
    m.blocks_per_level = blocks_per_level;
    m.ssm_state_dim = ssm_state_dim;
    m.ssm_kernel_len = ssm_kernel_len;
    m.fourier_hidden = fourier_hidden;
    m.diffusion_steps = diffusion_steps;
    m.fourier_after_ssm = fourier_after_ssm;
    return m;
}

training::TrainConfig RunConfig::train_config() const {
    training::TrainConfig t;
    t.batch_size = batch_size;
    t.total_steps = total_steps;
    t.lr = lr;
    t.warmup_steps = warmup_steps;
    t.weight_decay = weight_decay;
    t.clip_norm = clip_norm;
    t.seed = seed;
    t.checkpoint_interval = checkpoint_interval;
    t.eval_interval = eval_interval;
    t.per_batch_t = per_batch_t;
    return t;
}

diffusion::NoiseSchedule RunConfig::schedule() const {
    if (betas) return diffusion::NoiseSchedule(*betas);
    return diffusion::make_linear_schedule(diffusion_steps, beta_start, beta_end);
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) find_field(key).set(c, value);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::string to_json(const RunConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.name] = f.get(config);
    return j.dump(2) + "\n";
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("override '" + assignment + "' is not key=value");
    const auto key = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    find_field(key).set(config, value);
}

}  // namespace sfdlm::cli
