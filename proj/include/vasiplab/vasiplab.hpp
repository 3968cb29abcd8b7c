#pragma once

#include "blocks.hpp"
#include "centering.hpp"
#include "cone.hpp"
#include "covariance.hpp"
#include "decay.hpp"
#include "driver.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "gauss_embed.hpp"
#include "green_kubo.hpp"
#include "lemma_scaling.hpp"
#include "limits.hpp"
#include "observable.hpp"
#include "orbit.hpp"
#include "params.hpp"
#include "pm_map.hpp"
#include "quenched.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "ulam.hpp"
