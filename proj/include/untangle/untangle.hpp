#pragma once

#include "untangle/articulated.hpp"
#include "untangle/detector.hpp"
#include "untangle/error.hpp"
#include "untangle/generators.hpp"
#include "untangle/mesh.hpp"
#include "untangle/obj_io.hpp"
#include "untangle/optimizer.hpp"
#include "untangle/oracle.hpp"
#include "untangle/penalty.hpp"
#include "untangle/report.hpp"
#include "untangle/scenarios.hpp"
