#pragma once

#include "gpylab/bilinear.hpp"
#include "gpylab/diagonal.hpp"
#include "gpylab/numeric.hpp"
#include "gpylab/primes.hpp"
#include "gpylab/report.hpp"
#include "gpylab/semigroup.hpp"
#include "gpylab/sieve_classic.hpp"
#include "gpylab/smoothed.hpp"
#include "gpylab/tuples.hpp"
#include "gpylab/version.hpp"
