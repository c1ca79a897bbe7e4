#pragma once

#include "hokme/causal.hpp"
#include "hokme/condind.hpp"
#include "hokme/datagen.hpp"
#include "hokme/dataset_io.hpp"
#include "hokme/dr.hpp"
#include "hokme/error.hpp"
#include "hokme/format.hpp"
#include "hokme/gram_io.hpp"
#include "hokme/higher_order.hpp"
#include "hokme/mmd_test.hpp"
#include "hokme/path.hpp"
#include "hokme/serialize.hpp"
#include "hokme/sigkernel.hpp"
