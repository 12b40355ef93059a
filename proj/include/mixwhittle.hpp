#ifndef MIXWHITTLE_HPP
#define MIXWHITTLE_HPP

#include "mixwhittle/error.hpp"
#include "mixwhittle/special.hpp"
#include "mixwhittle/covariance.hpp"
#include "mixwhittle/design.hpp"
#include "mixwhittle/fft.hpp"
#include "mixwhittle/spectral.hpp"
#include "mixwhittle/linalg.hpp"
#include "mixwhittle/optimize.hpp"
#include "mixwhittle/gaussian_process.hpp"
#include "mixwhittle/aep.hpp"
#include "mixwhittle/estimate.hpp"
#include "mixwhittle/parallel.hpp"
#include "mixwhittle/predict.hpp"
#include "mixwhittle/simstudy.hpp"
#include "mixwhittle/ingest.hpp"
#include "mixwhittle/config.hpp"
#include "mixwhittle/cli.hpp"

#endif  // MIXWHITTLE_HPP
