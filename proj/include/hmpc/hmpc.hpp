#pragma once

#include "hmpc/benchmark.hpp"
#include "hmpc/config.hpp"
#include "hmpc/coordinator.hpp"
#include "hmpc/coupled_model.hpp"
#include "hmpc/error.hpp"
#include "hmpc/handover.hpp"
#include "hmpc/linalg.hpp"
#include "hmpc/local_controller.hpp"
#include "hmpc/model_io.hpp"
#include "hmpc/prediction.hpp"
#include "hmpc/protocol.hpp"
#include "hmpc/scenario.hpp"
#include "hmpc/simulator.hpp"
#include "hmpc/surrogate.hpp"
#include "hmpc/wire.hpp"
