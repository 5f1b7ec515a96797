#pragma once

#include "sea/numerics/adam.hpp"
#include "sea/numerics/conv.hpp"
#include "sea/numerics/fpenv.hpp"
#include "sea/numerics/gradcheck.hpp"
#include "sea/numerics/layers.hpp"
#include "sea/numerics/losses.hpp"
#include "sea/numerics/params.hpp"
#include "sea/numerics/rng.hpp"
#include "sea/numerics/tensor.hpp"
