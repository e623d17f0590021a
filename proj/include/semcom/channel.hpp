#pragma once

#include <complex>
#include <iosfwd>

#include "semcom/core.hpp"
#include "semcom/embedding.hpp"

namespace semcom {

struct ChannelConfig {
  enum class Model { Awgn, Rayleigh };
  Model model = Model::Awgn;
  double snr_db = 10.0;
  Packing packing = Packing::Real;
  bool csi_at_receiver = true;  // destination may equalize by the fading draw
  std::uint64_t seed = 0;
};

const char* to_string(ChannelConfig::Model m);
ChannelConfig::Model channel_model_from_string(const std::string& s);

/// One pass through y = h*x + delta, element-wise per symbol.
struct TransmitRecord {
  Packing packing = Packing::Real;
  bool csi_at_receiver = false;
  std::vector<std::complex<double>> x;
  std::vector<std::complex<double>> h;
  std::vector<std::complex<double>> delta;
  std::vector<std::complex<double>> y;

  // Debug CSV, columns: index,x,h,delta,y (complex parts as re/im pairs).
  void to_csv(std::ostream& out) const;
};

// Mean squared value per real coordinate over all entity rows.
double measure_signal_power(const EmbeddingTable& table);

// sigma with sigma^2 = signal_power_per_dim / 10^(snr_db/10).
double snr_to_sigma(double snr_db, double signal_power_per_dim);

// AWGN: h = 1, delta iid zero-mean Gaussian. Rayleigh: per-symbol fading with
// E[h^2] = 1 (real packing draws a Rayleigh magnitude, complex packing a
// circular complex coefficient). Deterministic per seed.
TransmitRecord transmit(std::span<const std::complex<double>> x, const ChannelConfig& cfg,
                        double signal_power_per_dim);
TransmitRecord transmit(std::span<const std::complex<double>> x, const ChannelConfig& cfg,
                        double signal_power_per_dim, Rng& rng);

// Deterministic core with injected coefficients; h and delta must match x.
TransmitRecord transmit_with(std::span<const std::complex<double>> x,
                             std::span<const std::complex<double>> h,
                             std::span<const std::complex<double>> delta, Packing packing,
                             bool csi_at_receiver);

}  // namespace semcom
