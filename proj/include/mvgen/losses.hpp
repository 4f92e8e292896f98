#pragma once

// Adversarial objectives, expressed over discriminator probability outputs so
// the algebra is testable in isolation. A discriminator stuck at 0.5 yields
// ln2 per bce term: 2*ln2 for the two-term losses, 3*ln2 for the three-term.

#include "mvgen/ops.hpp"

namespace mvgen {

// -mean log D(real) - mean log(1 - D(fake))
template <typename T>
TensorT<T> gan_d_loss(const TensorT<T>& d_real, const TensorT<T>& d_fake) {
  return add(bce_loss(d_real, T(1)), bce_loss(d_fake, T(0)));
}

// Three-term variant: real pairs, generated pairs, and generated/genuine
// mixed pairs all enter the discriminator objective.
template <typename T>
TensorT<T> three_term_d_loss(const TensorT<T>& d_real, const TensorT<T>& d_fake_pair,
                             const TensorT<T>& d_fake_mixed) {
  return add(add(bce_loss(d_real, T(1)), bce_loss(d_fake_pair, T(0))),
             bce_loss(d_fake_mixed, T(0)));
}

// Non-saturating by default (-mean log D(fake)); the minimax flag flips to
// +mean log(1 - D(fake)).
template <typename T>
TensorT<T> gan_g_loss(const TensorT<T>& d_fake, bool minimax = false) {
  if (minimax) return scale(bce_loss(d_fake, T(0)), T(-1));
  return bce_loss(d_fake, T(1));
}

template <typename T>
TensorT<T> two_term_g_loss(const TensorT<T>& d_fake_pair, const TensorT<T>& d_fake_mixed,
                           bool minimax = false) {
  return add(gan_g_loss(d_fake_pair, minimax), gan_g_loss(d_fake_mixed, minimax));
}

}  // namespace mvgen
