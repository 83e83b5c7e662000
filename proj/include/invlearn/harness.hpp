#pragma once

#include "invlearn/harness/config.hpp"
#include "invlearn/harness/report.hpp"
#include "invlearn/harness/runs.hpp"
