#pragma once

#include "cyclesync/direction_cycles.hpp"
#include "cyclesync/error.hpp"
#include "cyclesync/evaluation.hpp"
#include "cyclesync/graph.hpp"
#include "cyclesync/harness.hpp"
#include "cyclesync/location_solver.hpp"
#include "cyclesync/rotation_sync.hpp"
#include "cyclesync/so3.hpp"
#include "cyclesync/synthetic.hpp"
#include "cyclesync/taab.hpp"
