#ifndef GRASSMANN_GRASSMANN_HPP
#define GRASSMANN_GRASSMANN_HPP

#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/sparse_solvers.hpp"
#include "grassmann/coding.hpp"
#include "grassmann/kernel.hpp"
#include "grassmann/parallel.hpp"
#include "grassmann/dictionary_learning.hpp"
#include "grassmann/modeling.hpp"
#include "grassmann/evaluation.hpp"
#include "grassmann/io.hpp"

#endif  // GRASSMANN_GRASSMANN_HPP
