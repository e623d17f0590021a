#include "semcom/channel.hpp"

#include <cmath>
#include <ostream>

namespace semcom {

const char* to_string(ChannelConfig::Model m) {
  return m == ChannelConfig::Model::Awgn ? "awgn" : "rayleigh";
}

ChannelConfig::Model channel_model_from_string(const std::string& s) {
  if (s == "awgn") return ChannelConfig::Model::Awgn;
  if (s == "rayleigh") return ChannelConfig::Model::Rayleigh;
  throw std::invalid_argument("unknown channel model: " + s);
}

void TransmitRecord::to_csv(std::ostream& out) const {
  out << "index,x_re,x_im,h_re,h_im,delta_re,delta_im,y_re,y_im\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    out << i << ',' << fmt_double(x[i].real()) << ',' << fmt_double(x[i].imag()) << ','
        << fmt_double(h[i].real()) << ',' << fmt_double(h[i].imag()) << ','
        << fmt_double(delta[i].real()) << ',' << fmt_double(delta[i].imag()) << ','
        << fmt_double(y[i].real()) << ',' << fmt_double(y[i].imag()) << '\n';
}

double measure_signal_power(const EmbeddingTable& table) {
  if (table.entity_data.empty()) throw std::invalid_argument("measure_signal_power: empty table");
  double acc = 0.0;
  for (double v : table.entity_data) acc += v * v;
  return acc / static_cast<double>(table.entity_data.size());
}

double snr_to_sigma(double snr_db, double signal_power_per_dim) {
  if (!(signal_power_per_dim > 0))
    throw std::invalid_argument("snr_to_sigma: signal power must be > 0");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_to_sigma: snr must be finite");
  double sigma_sq = signal_power_per_dim / std::pow(10.0, snr_db / 10.0);
  return std::sqrt(sigma_sq);
}

TransmitRecord transmit_with(std::span<const std::complex<double>> x,
                             std::span<const std::complex<double>> h,
                             std::span<const std::complex<double>> delta, Packing packing,
                             bool csi_at_receiver) {
  if (h.size() != x.size() || delta.size() != x.size())
    throw std::invalid_argument("transmit_with: size mismatch");
  TransmitRecord rec;
  rec.packing = packing;
  rec.csi_at_receiver = csi_at_receiver;
  rec.x.assign(x.begin(), x.end());
  rec.h.assign(h.begin(), h.end());
  rec.delta.assign(delta.begin(), delta.end());
  rec.y.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) rec.y[i] = h[i] * x[i] + delta[i];
  return rec;
}

TransmitRecord transmit(std::span<const std::complex<double>> x, const ChannelConfig& cfg,
                        double signal_power_per_dim, Rng& rng) {
  for (const auto& s : x)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw std::invalid_argument("transmit: non-finite symbol");
  double sigma = snr_to_sigma(cfg.snr_db, signal_power_per_dim);

  TransmitRecord rec;
  rec.packing = cfg.packing;
  rec.csi_at_receiver = cfg.csi_at_receiver;
  rec.x.assign(x.begin(), x.end());
  rec.h.resize(x.size());
  rec.delta.resize(x.size());
  rec.y.resize(x.size());

  if (cfg.model == ChannelConfig::Model::Awgn && sigma == 0.0) {
    // Noiseless identity: y must equal x bit-wise.
    for (std::size_t i = 0; i < x.size(); ++i) {
      rec.h[i] = {1.0, 0.0};
      rec.delta[i] = {0.0, 0.0};
      rec.y[i] = x[i];
    }
    return rec;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::complex<double> h{1.0, 0.0};
    if (cfg.model == ChannelConfig::Model::Rayleigh) {
      double g1 = gauss(rng), g2 = gauss(rng);
      if (cfg.packing == Packing::Complex)
        h = {g1 * inv_sqrt2, g2 * inv_sqrt2};  // CN(0,1), E[|h|^2] = 1
      else
        h = {std::sqrt((g1 * g1 + g2 * g2) / 2.0), 0.0};  // Rayleigh, E[h^2] = 1
    }
    std::complex<double> d{0.0, 0.0};
    if (sigma > 0.0) {
      if (cfg.packing == Packing::Complex)
        d = {sigma * gauss(rng), sigma * gauss(rng)};  // sigma per real coordinate
      else
        d = {sigma * gauss(rng), 0.0};
    }
    rec.h[i] = h;
    rec.delta[i] = d;
    rec.y[i] = h * x[i] + d;
  }
  return rec;
}

TransmitRecord transmit(std::span<const std::complex<double>> x, const ChannelConfig& cfg,
                        double signal_power_per_dim) {
  Rng rng(cfg.seed);
  return transmit(x, cfg, signal_power_per_dim, rng);
}

}  // namespace semcom
