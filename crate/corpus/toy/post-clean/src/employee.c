#include "employee.h"

Employee employee_new(EmployeeType type, int monthlySalary, int commission, int bonus)
{
    Employee e;
    e.type = type;
    e.monthlySalary = monthlySalary;
    e.commission = commission;
    e.bonus = bonus;
    return e;
}

int payAmount(Employee e)
{
    switch (e.type) {
    case ENGINEER:
        return e.monthlySalary;
    case SALESMAN:
        return e.monthlySalary + e.commission;
    case MANAGER:
        return e.monthlySalary + e.bonus;
    }
    return 0;
}
