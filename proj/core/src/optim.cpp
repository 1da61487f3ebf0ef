#include "dspec/optim.hpp"

namespace dspec {

template struct SgdState<float>;
template void sgd_step(Graph<float>&, const GradientSet<float>&, SgdState<float>&, double, double, double);

} // namespace dspec
