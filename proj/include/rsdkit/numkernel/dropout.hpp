#pragma once

#include <random>
#include <span>

#include "rsdkit/numkernel/tensor.hpp"

namespace rsdkit::numkernel {

enum class Mode { kTrain, kEval };

/// Inverted dropout in place. In train mode each unit is zeroed with
/// probability p and survivors are scaled by 1/(1-p); the applied multipliers
/// are written to `mask` (same length as x) for the backward pass. Eval mode
/// is the identity and sets the mask to 1.
template <typename Real>
void dropout_inplace(std::span<Real> x, double p, Mode mode, std::mt19937_64& rng, std::span<Real> mask);

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, Mode mode, std::mt19937_64& rng,
                     Tensor<Real>* mask = nullptr);

}  // namespace rsdkit::numkernel
