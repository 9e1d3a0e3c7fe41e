// Python bindings for the core operations: noise synthesis, Wasserstein
// statistics, spectral analysis, the loss values, image metrics, and
// checkpointed inference. Image arrays use the [C,H,W] layout in [0,1].

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "noisetrans/checkpoint.hpp"
#include "noisetrans/losses.hpp"
#include "noisetrans/metrics.hpp"
#include "noisetrans/nets.hpp"
#include "noisetrans/pipeline.hpp"
#include "noisetrans/spectral.hpp"
#include "noisetrans/stats.hpp"

namespace py = pybind11;
using namespace noisetrans;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_chw(const Array& arr) {
  if (arr.ndim() != 3) throw std::invalid_argument("expected a [C,H,W] array");
  std::vector<std::int64_t> shape(arr.shape(), arr.shape() + 3);
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(data));
}

Array array_from_tensor(const Tensor& t) {
  Array out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

NoiseField field_from_chw(const Array& arr) { return NoiseField::from_tensor(tensor_from_chw(arr)); }

Array array_from_field(const NoiseField& f) { return array_from_tensor(f.to_tensor()); }

std::vector<double> vector_from_1d(const Array& arr) {
  if (arr.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return std::vector<double>(arr.data(), arr.data() + arr.size());
}

}  // namespace

PYBIND11_MODULE(_noisetrans, m) {
  m.doc() = "Noise-translation denoising toolkit: statistics, spectra, losses, inference";

  py::class_<Prng>(m, "Prng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next_u64", &Prng::next_u64)
      .def("uniform01", &Prng::uniform01)
      .def("normal", py::overload_cast<double, double>(&Prng::normal), py::arg("mu"),
           py::arg("sigma"))
      .def("split", py::overload_cast<std::uint64_t>(&Prng::split, py::const_),
           py::arg("stream_id"))
      .def("split_named",
           [](const Prng& p, const std::string& name) { return p.split(std::string_view(name)); },
           py::arg("stream_name"));

  m.def(
      "sample_gaussian",
      [](Prng& rng, std::int64_t h, std::int64_t w, std::int64_t c, double mu, double sigma) {
        return array_from_field(sample_gaussian(rng, h, w, c, mu, sigma));
      },
      py::arg("rng"), py::arg("height"), py::arg("width"), py::arg("channels"), py::arg("mu"),
      py::arg("sigma"));
  m.def(
      "synth_correlated",
      [](Prng& rng, std::int64_t h, std::int64_t w, std::int64_t c, double sigma) {
        return array_from_field(synth_correlated(rng, h, w, c, sigma));
      },
      py::arg("rng"), py::arg("height"), py::arg("width"), py::arg("channels"), py::arg("sigma"));
  m.def(
      "synth_signal_dependent",
      [](Prng& rng, const Array& clean, double a, double b) {
        return array_from_field(synth_signal_dependent(rng, tensor_from_chw(clean), a, b));
      },
      py::arg("rng"), py::arg("clean"), py::arg("a"), py::arg("b"));
  m.def(
      "sample_rayleigh",
      [](Prng& rng, std::int64_t count, double sigma) {
        auto v = sample_rayleigh(rng, count, sigma);
        return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
      },
      py::arg("rng"), py::arg("count"), py::arg("sigma"));

  m.def(
      "empirical_moments",
      [](const Array& field) {
        auto [mu, sigma] = empirical_moments(field_from_chw(field));
        return py::make_tuple(mu, sigma);
      },
      py::arg("field"));
  m.def(
      "w1_sorted",
      [](const Array& x, const Array& y) {
        if (x.ndim() == 1 && y.ndim() == 1) {
          return w1_sorted(SampleVector(vector_from_1d(x)), SampleVector(vector_from_1d(y)));
        }
        return w1_sorted(field_from_chw(x), field_from_chw(y));
      },
      py::arg("x"), py::arg("y"),
      "order-statistics 1-Wasserstein distance (1-D samples or [C,H,W] fields)");
  m.def(
      "w1_oracle",
      [](const Array& x, const Array& y) {
        return w1_oracle(SampleVector(vector_from_1d(x)), SampleVector(vector_from_1d(y)));
      },
      py::arg("x"), py::arg("y"), "exact matching-based optimal transport cost, n <= 64");

  m.def(
      "dft2",
      [](const Array& field) {
        const auto spec = spectral::dft2_channelwise(field_from_chw(field));
        py::array_t<std::complex<double>> out({spec.channels, spec.height, spec.width});
        std::copy(spec.coeffs.begin(), spec.coeffs.end(), out.mutable_data());
        return out;
      },
      py::arg("field"), "channel-wise unnormalised 2-D DFT");
  m.def(
      "spectrum_magnitudes",
      [](const Array& field, bool exclude_special_bins) {
        const auto mags =
            spectral::magnitude(spectral::dft2_channelwise(field_from_chw(field)),
                                exclude_special_bins);
        return mags.per_channel;
      },
      py::arg("field"), py::arg("exclude_special_bins") = true);
  m.def("rayleigh_pdf", &spectral::rayleigh_pdf, py::arg("x"), py::arg("sigma"));
  m.def("gaussian_spectrum_scale", &spectral::gaussian_spectrum_scale, py::arg("sigma"),
        py::arg("height"), py::arg("width"));

  m.def(
      "loss_breakdown",
      [](const Array& translated_noise, const Array& reference, double alpha, double beta,
         const Array& denoised, const Array& clean) {
        Graph g;
        Var noise = g.leaf(tensor_from_chw(translated_noise), false);
        const NoiseField ref = field_from_chw(reference);
        Var spatial = loss_spatial(noise, ref);
        Var freq = loss_freq(noise, ref);
        Var implicit = loss_implicit(g.leaf(tensor_from_chw(denoised), false),
                                     g.leaf(tensor_from_chw(clean), false));
        const LossBreakdown b = make_breakdown(implicit.value().item(), spatial.value().item(),
                                               freq.value().item(), alpha, beta);
        py::dict out;
        out["l_implicit"] = b.implicit;
        out["l_spatial"] = b.spatial;
        out["l_freq"] = b.freq;
        out["l_explicit"] = b.explicit_term;
        out["l_total"] = b.total;
        return out;
      },
      py::arg("translated_noise"), py::arg("reference"), py::arg("alpha"), py::arg("beta"),
      py::arg("denoised"), py::arg("clean"));

  m.def(
      "psnr", [](const Array& a, const Array& b, double peak) {
        return psnr(tensor_from_chw(a), tensor_from_chw(b), peak);
      },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def(
      "ssim",
      [](const Array& a, const Array& b) { return ssim(tensor_from_chw(a), tensor_from_chw(b)); },
      py::arg("a"), py::arg("b"));
  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total"), py::arg("lr_init"),
        py::arg("lr_final"));

  m.def(
      "denoise",
      [](const Array& noisy, const std::string& translator_ckpt, const std::string& denoiser_ckpt,
         std::uint64_t seed) {
        const Translator tr = translator_from_checkpoint(load_checkpoint(translator_ckpt));
        const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_ckpt));
        Prng rng = Prng(seed).split("denoise");
        const auto result = denoise_pipeline(tensor_from_chw(noisy), tr, den, rng);
        return py::make_tuple(array_from_tensor(result.translated),
                              array_from_tensor(result.denoised));
      },
      py::arg("noisy"), py::arg("translator_ckpt"), py::arg("denoiser_ckpt"), py::arg("seed") = 1,
      "full translate-then-denoise pipeline; returns (translated, denoised)");
  m.def(
      "denoise_only",
      [](const Array& noisy, const std::string& denoiser_ckpt) {
        const Denoiser den = denoiser_from_checkpoint(load_checkpoint(denoiser_ckpt));
        return array_from_tensor(denoise_only(tensor_from_chw(noisy), den));
      },
      py::arg("noisy"), py::arg("denoiser_ckpt"));

  m.def(
      "analyze_noise",
      [](const Array& noisy, const Array& clean, std::uint64_t seed) {
        Prng rng = Prng(seed).split("analyze");
        const NoiseReport r = analyze_noise(tensor_from_chw(noisy), tensor_from_chw(clean), rng);
        py::dict out;
        out["mu_hat"] = r.mu_hat;
        out["sigma_hat"] = r.sigma_hat;
        out["no_noise"] = r.no_noise;
        out["spatial_w1"] = r.spatial_w1;
        out["spatial_threshold"] = r.spatial_threshold;
        out["freq_w1"] = r.freq_w1;
        out["freq_threshold"] = r.freq_threshold;
        out["rayleigh_scale"] = r.rayleigh_scale;
        out["lag1_horizontal"] = r.lag1_horizontal;
        out["lag1_vertical"] = r.lag1_vertical;
        out["signal_dependency_slope"] = r.signal_dependency_slope;
        return out;
      },
      py::arg("noisy"), py::arg("clean"), py::arg("seed") = 1);
}
