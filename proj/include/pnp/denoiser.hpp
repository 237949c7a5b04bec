#pragma once

#include <string>

#include "pnp/imaging.hpp"

namespace pnp {

/// A sigma-parameterized image-to-image map used in place of a proximal step.
/// Implementations must return an image with the input's dims.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::string name() const = 0;
  virtual Image apply(const Image& z, double sigma) const = 0;
};

}  // namespace pnp
