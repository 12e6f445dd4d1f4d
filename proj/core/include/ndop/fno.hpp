#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ndop/odeint.hpp"
#include "ndop/rng.hpp"
#include "ndop/tensor.hpp"

namespace ndop {

enum class Activation { kGelu, kTanh, kRelu, kIdentity };

std::string to_string(Activation a);
/// Accepts "gelu", "tanh", "relu", "identity". Throws InvalidArgument.
Activation activation_from_string(const std::string& name);

/// Architecture of the Fourier neural operator.
struct FnoSpec {
  int dims = 1;
  int width = 64;  // d_v
  std::array<int, 2> k_max{24, 24};
  int n_layers = 4;
  Activation activation = Activation::kGelu;
  int in_channels = 1;   // state channels, before coordinate augmentation
  int out_channels = 1;
  bool append_coordinates = true;  // concatenate x/L (and y/L) to the input
  int projection_width = 128;      // 0: Q is a single linear map d_v -> out

  /// Channels seen by the lift P.
  int lifted_channels() const noexcept { return in_channels + (append_coordinates ? dims : 0); }

  /// Retained Fourier modes per channel: k_max+1 in 1-D, (2 kx+1)(ky+1) in 2-D.
  int modes() const noexcept;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;

  friend bool operator==(const FnoSpec&, const FnoSpec&) = default;
};

/// Offsets into the flat parameter vector. Real matrices are stored
/// row-major as [out][in]; spectral weights as [mode][out][in] complex
/// values with interleaved real/imaginary parts.
struct FnoLayout {
  struct Layer {
    std::size_t spectral;  // 2 * modes * width * width
    std::size_t weight;    // width * width
    std::size_t bias;      // width
  };
  std::size_t lift_weight = 0, lift_bias = 0;
  std::vector<Layer> layers;
  std::size_t proj1_weight = 0, proj1_bias = 0;  // two-stage projection only
  std::size_t proj2_weight = 0, proj2_bias = 0;  // final map to out_channels
  std::size_t total = 0;
};

FnoLayout fno_layout(const FnoSpec& spec);

/// Closed-form |P| + sum_l (|R_l| + |W_l|) + |Q|.
std::size_t fno_parameter_count(const FnoSpec& spec);

using ParamVector = std::vector<double>;

/// Parameter set theta. `values` is the canonical flat vector.
struct FnoParams {
  FnoSpec spec;
  ParamVector values;
};

/// Spectral weights U[0, 1/d_v^2) per real/imag part; pointwise weights
/// U(-1/fan_in, 1/fan_in); biases zero.
FnoParams fno_init(const FnoSpec& spec, Rng& rng);

ParamVector params_flatten(const FnoParams& params);
/// Throws ShapeError unless values.size() == fno_parameter_count(spec).
FnoParams params_unflatten(const FnoSpec& spec, ParamVector values);

/// Throws InvalidArgument if the grid cannot hold k_max, ShapeError on a
/// channel or dimension mismatch.
Field fno_forward(const FnoParams& params, const Field& u);

struct FnoGradient {
  ParamVector params;
  Field input;
};

/// Gradients of <cotangent, fno_forward(params, u)>.
FnoGradient fno_vjp(const FnoParams& params, const Field& u, const Field& cotangent);

/// The FNO as an autonomous vector field du/dt = G(u; theta), sharing the
/// parameters it was built from.
class FnoField final : public DifferentiableField {
 public:
  explicit FnoField(std::shared_ptr<const FnoParams> params);

  const FnoParams& params() const noexcept { return *params_; }

  Field evaluate(const Field& state, double t) const override;
  std::size_t parameter_count() const override { return params_->values.size(); }
  Field evaluate_recorded(const Field& state, double t, std::unique_ptr<Tape>& tape) const override;
  Field backward(const Tape& tape, const Field& cotangent, std::span<double> param_grad) const override;

 private:
  std::shared_ptr<const FnoParams> params_;
};

}  // namespace ndop
