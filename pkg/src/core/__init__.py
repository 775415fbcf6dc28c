# Core module for the boson sampling toolkit
