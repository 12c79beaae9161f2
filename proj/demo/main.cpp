// Feed replay demo: events arrive newest-first and are rebuilt into
// chronological order, so every event is inserted at the head of the
// timeline. The run self-checks its aggregates and exits nonzero on any
// mismatch.

#include <cstdio>
#include <deque>
#include <vector>

namespace {

constexpr int kEvents = 48000;

unsigned lcg_next(unsigned state) { return state * 1664525u + 1013904223u; }

}  // namespace

int main() {
  auto* timeline = new std::vector<long>();
  unsigned state = 12345u;
  long long inserted_sum = 0;
  long first_value = -1;
  for (int i = 0; i < kEvents; ++i) {
    state = lcg_next(state);
    const long value = static_cast<long>(state % 100000u);
    if (i == 0) first_value = value;
    inserted_sum += value;
    timeline->insert(timeline->begin(), value);
  }

  long long replay_sum = 0;
  for (long v : *timeline) replay_sum += v;

  // cold path: a small scratch buffer of recent ids
  auto* recent = new std::vector<long>();
  for (long i = 0; i < 256; ++i) recent->push_back(i);
  long long recent_sum = 0;
  for (long v : *recent) recent_sum += v;

  const bool ok = replay_sum == inserted_sum &&
                  timeline->size() == static_cast<std::size_t>(kEvents) &&
                  timeline->back() == first_value && recent_sum == 256 * 255 / 2;
  delete timeline;
  delete recent;

  if (!ok) {
    std::fprintf(stderr, "self-check failed\n");
    return 1;
  }
  std::printf("ok\n");
  return 0;
}
