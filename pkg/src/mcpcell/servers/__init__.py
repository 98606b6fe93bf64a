"""The three evaluation tool servers: spindle (direct), drill and robot
(gateways onto the device bus)."""
