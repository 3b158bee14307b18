// Umbrella header.
#pragma once

#include "micromix/config.hpp"
#include "micromix/core.hpp"
#include "micromix/csv.hpp"
#include "micromix/duct.hpp"
#include "micromix/flow.hpp"
#include "micromix/geometry.hpp"
#include "micromix/pipeline.hpp"
#include "micromix/report.hpp"
#include "micromix/topology.hpp"
#include "micromix/tracer.hpp"
#include "micromix/transport.hpp"
#include "micromix/units.hpp"
#include "micromix/vtk.hpp"
