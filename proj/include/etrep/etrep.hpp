#pragma once

#include <etrep/errors.hpp>
#include <etrep/io.hpp>
#include <etrep/model.hpp>
#include <etrep/rotation.hpp>
#include <etrep/shape_space.hpp>
#include <etrep/simulation.hpp>
#include <etrep/stats.hpp>
