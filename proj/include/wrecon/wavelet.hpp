#pragma once

#include "wrecon/autodiff.hpp"
#include "wrecon/tensor.hpp"

namespace wrecon {

/// One level of the 2-D Haar decomposition; every band is [N,C,H/2,W/2].
struct SubbandSet {
  Tensor ll;  // approximation
  Tensor lh;  // horizontal detail
  Tensor hl;  // vertical detail
  Tensor hh;  // diagonal detail
};

/// Orthonormal single-level Haar analysis of [N,C,H,W] (H, W even). Each 2x2
/// block [[a,b],[c,d]] maps to ll=(a+b+c+d)/2, lh=(a+b-c-d)/2,
/// hl=(a-b+c-d)/2, hh=(a-b-c+d)/2.
SubbandSet dwt2_haar(const Tensor& x);

/// Exact inverse of dwt2_haar.
Tensor iwt2_haar(const SubbandSet& s);

/// Differentiable analysis layer: [N,C,H,W] -> [N,4C,H/2,W/2] with channel
/// blocks ordered LL | LH | HL | HH.
Var dwt_layer(const Var& x);

/// Differentiable synthesis layer: [N,4C,H,W] -> [N,C,2H,2W], inverse of dwt_layer.
Var iwt_layer(const Var& x);

/// Stacked-channel forms used by the layers (no graph).
Tensor dwt_stacked(const Tensor& x);
Tensor iwt_stacked(const Tensor& x);

}  // namespace wrecon
