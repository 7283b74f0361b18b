#pragma once

#include "braim/kernels.hpp"

namespace braim::kernels::detail {

extern const Table kScalarTable;
#if defined(BRAIM_HAVE_AVX2)
extern const Table kAvx2Table;
#endif

}  // namespace braim::kernels::detail
