// Automaton with state s cycling through 1..4 and two data counters.
// In every fourth state x1 and x2 must agree.
int s;
int x1;
int x2;

x1 = 0;
x2 = 0;
s = 1;
while (nondet()) {
  if (s == 1) {
    x1 = x1 + 1;
  } else if (s == 2) {
    x2 = x2 + 1;
  }
  s = s + 1;
  if (s == 5) {
    s = 1;
  }
  if (s == 1) {
    assert(x1 == x2);
  }
}
