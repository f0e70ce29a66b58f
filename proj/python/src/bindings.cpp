#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "sfdlm/cli/commands.hpp"
#include "sfdlm/diffusion/forward.hpp"
#include "sfdlm/errors.hpp"
#include "sfdlm/model/layers.hpp"
#include "sfdlm/sampling/sampler.hpp"
#include "sfdlm/text/corpus.hpp"
#include "sfdlm/training/checkpoint.hpp"

namespace py = pybind11;
using namespace sfdlm;

namespace {

using CheckpointPtr = std::shared_ptr<training::Checkpoint>;

py::dict sample_result(const sampling::SampleResult& r, const text::Vocab& vocab) {
    py::dict d;
    d["tokens"] = r.tokens;
    d["text"] = text::decode(r.tokens, vocab);
    py::list trace;
    for (const auto& s : r.trace) trace.append(text::decode(s, vocab));
    d["trace"] = trace;
    return d;
}

sampling::SampleResult run_sampler(const training::Checkpoint& ck, sampling::SampleRequest req) {
    py::gil_scoped_release release;
    sampling::ModelDenoiser denoiser(ck.model);
    req.length = denoiser.seq_len();
    return sampling::run(denoiser, req);
}

std::pair<int, std::string> captured(const std::function<int(std::ostream&, std::ostream&)>& f) {
    std::ostringstream out, err;
    const int code = f(out, err);
    return {code, out.str() + err.str()};
}

cli::RunConfig run_config(const py::object& config, const std::vector<std::string>& overrides) {
    cli::RunConfig c;
    if (py::isinstance<py::str>(config)) {
        c = cli::load_run_config(config.cast<std::string>());
    } else if (py::isinstance<py::dict>(config)) {
        c = cli::parse_run_config(py::module_::import("json").attr("dumps")(config).cast<std::string>());
    } else if (!config.is_none()) {
        throw py::type_error("config must be a path, a dict or None");
    }
    for (const auto& o : overrides) cli::apply_override(c, o);
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "State-Fourier discrete diffusion language model";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("linear_schedule", [](std::size_t steps, double start, double end) {
        return diffusion::make_linear_schedule(steps, start, end).betas();
    }, py::arg("steps"), py::arg("beta_start"), py::arg("beta_end"));
    m.def("marginal_survival", [](const std::vector<double>& betas, std::size_t t) {
        return diffusion::marginal_survival(diffusion::NoiseSchedule(betas), t);
    }, py::arg("betas"), py::arg("t"));
    m.def("match_probability", &diffusion::match_probability, py::arg("survival"), py::arg("vocab_size"));
    m.def("forward_step", [](const TokenSequence& x, double beta, std::size_t vocab_size, std::uint64_t seed) {
        Rng rng(seed);
        return diffusion::forward_step(x, beta, rng, vocab_size).tokens;
    }, py::arg("tokens"), py::arg("beta"), py::arg("vocab_size"), py::arg("seed") = 0);
    m.def("forward_to_step", [](const TokenSequence& x, std::size_t t, const std::vector<double>& betas,
                                std::size_t vocab_size, std::uint64_t seed) {
        Rng rng(seed);
        return diffusion::forward_to_step(x, t, diffusion::NoiseSchedule(betas), rng, vocab_size);
    }, py::arg("tokens"), py::arg("t"), py::arg("betas"), py::arg("vocab_size"), py::arg("seed") = 0);

    m.def("ssm_kernel", [](py::array_t<double> a_raw, py::array_t<double> b, py::array_t<double> c,
                           py::array_t<double> d, std::size_t length) {
        auto tensor = [](const py::array_t<double>& x) {
            numerics::Shape shape(x.shape(), x.shape() + x.ndim());
            return numerics::Tensor::from(shape, std::vector<double>(x.data(), x.data() + x.size()));
        };
        const auto k = model::ssm_kernel({tensor(a_raw), tensor(b), tensor(c), tensor(d)}, length);
        py::array_t<double> out({k.dim(0), k.dim(1)});
        std::copy(k.data().begin(), k.data().end(), out.mutable_data());
        return out;
    }, py::arg("a_raw"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("length"));

    py::class_<text::Vocab>(m, "Vocab")
        .def_static("from_corpus", [](const std::string& text) { return text::build_char_vocab(text); })
        .def_static("bpe", &text::bpe_train, py::arg("corpus"), py::arg("num_merges"))
        .def_static("load", &text::Vocab::load)
        .def("__len__", &text::Vocab::size)
        .def("encode", [](const text::Vocab& v, const std::string& s) { return text::encode(s, v); })
        .def("decode", [](const text::Vocab& v, const TokenSequence& ids) { return text::decode(ids, v); });

    py::class_<training::Checkpoint, CheckpointPtr>(m, "Checkpoint")
        .def_static("load", [](const std::string& path) {
            return std::make_shared<training::Checkpoint>(training::load_checkpoint(path));
        })
        .def_property_readonly("vocab", [](const training::Checkpoint& c) { return c.vocab; })
        .def_property_readonly("vocab_size", [](const training::Checkpoint& c) { return c.vocab.size(); })
        .def_property_readonly("seq_len", [](const training::Checkpoint& c) { return c.model.config().seq_len; })
        .def_property_readonly("num_steps", [](const training::Checkpoint& c) { return c.schedule.steps(); })
        .def_property_readonly("betas", [](const training::Checkpoint& c) { return c.schedule.betas(); })
        .def_property_readonly("global_step", [](const training::Checkpoint& c) { return c.global_step; })
        .def_property_readonly("parameter_count", [](const training::Checkpoint& c) { return c.model.parameter_count(); })
        .def("logits", [](const training::Checkpoint& c, const TokenSequence& x, std::size_t t) {
            const auto values = sampling::ModelDenoiser(c.model).logits(x, t);
            py::array_t<double> out({x.size(), c.vocab.size()});
            std::copy(values.begin(), values.end(), out.mutable_data());
            return out;
        }, py::arg("tokens"), py::arg("t"))
        .def("generate", [](const training::Checkpoint& c, std::uint64_t seed, double temperature, std::size_t steps) {
            sampling::SampleRequest req;
            req.seed = seed;
            req.temperature = temperature;
            req.steps = steps;
            return sample_result(run_sampler(c, req), c.vocab);
        }, py::arg("seed") = 0, py::arg("temperature") = 1.0, py::arg("steps") = 0)
        .def("inpaint", [](const training::Checkpoint& c, const TokenSequence& prompt, const std::vector<bool>& mask,
                           std::uint64_t seed, double temperature) {
            sampling::SampleRequest req;
            req.mode = sampling::SampleMode::inpaint;
            req.prompt = prompt;
            req.freeze_mask = mask;
            req.seed = seed;
            req.temperature = temperature;
            return sample_result(run_sampler(c, req), c.vocab);
        }, py::arg("prompt"), py::arg("mask"), py::arg("seed") = 0, py::arg("temperature") = 1.0);

    m.def("train", [](const py::object& config, const std::vector<std::string>& overrides,
                      std::optional<std::string> resume) {
        const auto c = run_config(config, overrides);
        py::gil_scoped_release release;
        return captured([&](std::ostream& out, std::ostream& err) {
            return cli::guarded([&] { return cli::cmd_train(c, {resume}, out, err); }, err);
        });
    }, py::arg("config") = py::none(), py::arg("overrides") = std::vector<std::string>{},
       py::arg("resume") = py::none(),
       "Runs training; returns (exit_code, log).");
    m.def("noise_sim", [](const py::object& config, std::size_t samples, std::size_t vocab_size) {
        const auto c = run_config(config, {});
        return captured([&](std::ostream& out, std::ostream& err) {
            return cli::guarded([&] { return cli::cmd_noise_sim(c, samples, vocab_size, out, err); }, err);
        });
    }, py::arg("config") = py::none(), py::arg("samples") = 100000, py::arg("vocab_size") = 62);
    m.def("grad_check", [] {
        py::gil_scoped_release release;
        return captured([](std::ostream& out, std::ostream& err) { return cli::cmd_grad_check(out, err); });
    }, "Runs the finite-difference suite; returns (exit_code, report).");
}
