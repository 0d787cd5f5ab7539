"""Query/response pairs from the two recorded flight conversations.

Errors are (x, y, z) tracking errors; where an axis is not reported the value
is an arbitrary in-threshold number.
"""

OSCILLATION_MESSAGE = (
    "VERY DANGEROUS oscillations on y-axis. Frequency is 0.67 [Hz], amplitude is 0.19 [m]."
)

CONVERSATION_1 = [
    {
        "t": 3.92,
        "errors": (0.0, 0.0, 0.0),
        "prompt": "([0], '')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["do_nothing"], "no_issue", "Since there\n'
            "            are currently no issues detected with the drone, no corrective actions are needed "
            'at this time."'
        ),
        "actions": ["do_nothing"],
        "label": "no_issue",
    },
    {
        "t": 8.47,
        "errors": (0.03, -0.44, -0.14),
        "prompt": "([4, 6], 'z error is -0.14, y error is -0.44, ')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["increase_thrust", "accel_positive_y"]\n'
            '            "flying_too_low_and_negative_y_position", "The drone is currently flying too low '
            "and also has a\n            negative error in the Y-axis. Increasing thrust will correct the "
            "altitude issue, and accelerating in\n            the positive Y direction will correct the "
            'positional error."'
        ),
        "actions": ["increase_thrust", "accel_positive_y"],
        "label": "flying_too_low_and_negative_y_position",
    },
    {
        "t": 14.03,
        "errors": (0.0, -1.18, -0.63),
        "prompt": "([4, 6], 'z error is -0.63, y error is -1.18, ')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["increase_thrust", "accel_positive_y",  \n'
            '             "tune_controller_by_increasing_penalty_on_position_errors"], '
            '"flying_too_low_and_large_negative\n             _y_position", "The drone is flying '
            "significantly too low and has a large negative error on the Y-axis.\n             It's "
            "necessary to increase thrust and accelerate in the positive Y direction to correct these "
            "issues. \n             Additionally, the large errors suggest it may be beneficial to tune "
            'the controller to penalize\n             position errors more severely."'
        ),
        "actions": [
            "increase_thrust", "accel_positive_y",
            "tune_controller_by_increasing_penalty_on_position_errors",
        ],
        "label": "flying_too_low_and_large_negative_y_position",
    },
    {
        "t": 19.0,
        "errors": (0.12, 0.15, -0.30),
        "prompt": "([4, 5, 7], 'z error is -0.30, y error is 0.15, x error is 0.12, ')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["increase_thrust", "accel_negative_y",\n'
            '            "accel_negative_x"], "flying_too_low_and_positive_position_errors", "The drone is '
            "below the desired \n            altitude and has minor positive errors in both X and Y axis. "
            "To correct these, it should increase \n            thrust to gain altitude, and decelerate "
            'in Y and X directions."'
        ),
        "actions": ["increase_thrust", "accel_negative_y", "accel_negative_x"],
        "label": "flying_too_low_and_positive_position_errors",
    },
]

CONVERSATION_2 = [
    {
        "t": 6.07,
        "errors": (0.0, 0.0, 0.0),
        "prompt": "([0], '')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["do_nothing"]\nreason: The reported \n'
            "           information indicates that there are currently no discernible issues with the "
            "drone. Therefore, no \n           actions are necessary at this time."
        ),
        "actions": ["do_nothing"],
        "label": "",
    },
    {
        "t": 13.95,
        "errors": (-0.40, -0.62, -0.69),
        "prompt": "([4, 6, 8], 'z error is -0.69, y error is -0.62, x error is -0.40, ')",
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["increase_thrust", "tune_controller_by\n'
            '            _decreasing_the_cost_of_actuation_usage", "accel_positive_y", "accel_positive_x"] '
            "reason: The drone \n            is flying too low and has negative position errors in both "
            "X and Y directions, hence, increasing \n            thrust is the first step, along with "
            "acceleration in positive X and Y directions to correct the \n            position errors."
        ),
        "actions": [
            "increase_thrust", "tune_controller_by_decreasing_the_cost_of_actuation_usage",
            "accel_positive_y", "accel_positive_x",
        ],
        "label": "",
    },
    {
        "t": 57.48,
        "errors": (-0.28, -0.65, 0.05),
        "extra": OSCILLATION_MESSAGE,
        "prompt": (
            "([6, 8], 'y error is -0.65, x error is -0.28, VERY DANGEROUS oscillations on y-axis. "
            "Frequency is 0.67 [Hz], amplitude is 0.19 [m].')"
        ),
        "response": (
            'list_of_function_names_to_be_executed_right_now: ["emergency_landing"] reason: The drone \n'
            "            has large errors  in both X and Y directions, and additionally, is exhibiting "
            "dangerous oscillations \n            on the Y-axis. This indicates unstable flight dynamics "
            "which could be detrimental to the safety of the\n            operation. An immediate "
            "emergency landing should be executed to prevent potential damage or hazards."
        ),
        "actions": ["emergency_landing"],
        "label": "",
    },
]

ALL_TURNS = CONVERSATION_1 + CONVERSATION_2
