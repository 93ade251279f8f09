#include "tiersim/scheduler.hpp"

namespace tiersim {

std::string_view to_string(SchedulingPolicy policy) {
  return policy == SchedulingPolicy::Fcfs ? "fcfs" : "frfcfs";
}

}  // namespace tiersim
