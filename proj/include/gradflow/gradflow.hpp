#pragma once

#include "gradflow/config.hpp"
#include "gradflow/errors.hpp"
#include "gradflow/experiment.hpp"
#include "gradflow/fluctuations.hpp"
#include "gradflow/format.hpp"
#include "gradflow/gradient_flow.hpp"
#include "gradflow/jko.hpp"
#include "gradflow/ldp.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/measures_io.hpp"
#include "gradflow/models.hpp"
#include "gradflow/numerics.hpp"
#include "gradflow/particles.hpp"
#include "gradflow/transport.hpp"
