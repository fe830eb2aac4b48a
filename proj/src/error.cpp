#include "fourphase/error.hpp"
