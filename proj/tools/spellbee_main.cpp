#include <iostream>

int main() {
    std::cout << "spellbee: placeholder\n";
    return 0;
}
