#pragma once

#include "carpetlab/group.hpp"
#include "carpetlab/quadrature.hpp"
#include "carpetlab/irreps.hpp"
#include "carpetlab/class_function.hpp"
#include "carpetlab/actions.hpp"
#include "carpetlab/lattice.hpp"
#include "carpetlab/planar.hpp"
#include "carpetlab/mc.hpp"
#include "carpetlab/rw_analysis.hpp"
#include "carpetlab/experiments.hpp"
