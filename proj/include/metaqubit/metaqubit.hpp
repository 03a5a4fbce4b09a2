#pragma once

#include "metaqubit/atomic.hpp"
#include "metaqubit/config.hpp"
#include "metaqubit/dynamics.hpp"
#include "metaqubit/fitting.hpp"
#include "metaqubit/harness.hpp"
#include "metaqubit/io.hpp"
#include "metaqubit/parallel.hpp"
#include "metaqubit/ramsey.hpp"
#include "metaqubit/scatter.hpp"
#include "metaqubit/stirap.hpp"
#include "metaqubit/tomography.hpp"
