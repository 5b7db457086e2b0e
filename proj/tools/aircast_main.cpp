#include <cstdio>

int main() {
    std::puts("aircast: not wired up yet");
    return 0;
}
