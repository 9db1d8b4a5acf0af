#pragma once

// Sign conventions fixed once by calibration against the rotation scenario
// (see tests/test_calibration.cpp, which re-derives both signs).
//
// Fundamental fields are X_N(x) = d/dt exp(tX).x at t = 0, and the moment is
//   mu(X) = kFundamentalFieldSign * (-(i / 2 pi)) Xi(X_U)
// with X_U the same derivative on the total space. With this choice the
// moment route mu(X) + rho^S(X_N) reproduces d/dt alpha^S_{exp(tX)} exactly.
//
// Differentiating the invariance identity d alpha_phi = phi^* rho - rho along
// the flow gives L_X rho^S = d a^S(X), so the descent residual is
//   L_X rho^S + kDescentSign * d a^S(X)
// with kDescentSign = -1.

namespace eqhol {

inline constexpr int kFundamentalFieldSign = +1;
inline constexpr int kDescentSign = -1;

}  // namespace eqhol
