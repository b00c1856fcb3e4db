#pragma once

#include <ahofm/basis.hpp>
#include <ahofm/data.hpp>
#include <ahofm/error.hpp>
#include <ahofm/factor.hpp>
#include <ahofm/model.hpp>
#include <ahofm/simulate.hpp>
#include <ahofm/smoothing.hpp>
#include <ahofm/studies.hpp>
#include <ahofm/trainer.hpp>
