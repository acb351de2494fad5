#ifndef SEEDLAB_SEEDLAB_HPP
#define SEEDLAB_SEEDLAB_HPP

#include "seedlab/attack.hpp"
#include "seedlab/config.hpp"
#include "seedlab/core.hpp"
#include "seedlab/detectors.hpp"
#include "seedlab/entropy.hpp"
#include "seedlab/experiments.hpp"
#include "seedlab/io.hpp"
#include "seedlab/pipeline.hpp"
#include "seedlab/selftest.hpp"
#include "seedlab/splitmix.hpp"
#include "seedlab/stats.hpp"
#include "seedlab/token_model.hpp"
#include "seedlab/token_set.hpp"
#include "seedlab/watermark.hpp"

#endif  // SEEDLAB_SEEDLAB_HPP
