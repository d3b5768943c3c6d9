#include <gtest/gtest.h>
#include "rcdepth/rcdepth.hpp"
