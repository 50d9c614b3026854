#ifndef LXK_LXK_HPP
#define LXK_LXK_HPP

#include "agglomerative.hpp"
#include "birch.hpp"
#include "distance.hpp"
#include "error.hpp"
#include "evaluate.hpp"
#include "experiment.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "kmeans.hpp"
#include "leiden.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "synth.hpp"
#include "transform.hpp"
#include "types.hpp"

#endif
