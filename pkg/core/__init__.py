# Core package - configuration, errors and the experiment driver