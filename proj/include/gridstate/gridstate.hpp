#pragma once

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/identities.hpp"
#include "gridstate/io.hpp"
#include "gridstate/loads.hpp"
#include "gridstate/machine.hpp"
#include "gridstate/network.hpp"
#include "gridstate/simulate.hpp"
#include "gridstate/steady_state.hpp"
#include "gridstate/system.hpp"
