#include <iostream>

int main() {
    std::cout << "latentshift: CLI under construction\n";
    return 0;
}
