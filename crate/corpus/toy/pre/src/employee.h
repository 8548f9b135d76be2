#ifndef EMPLOYEE_H
#define EMPLOYEE_H

typedef enum { ENGINEER, SALESMAN, MANAGER } EmployeeType;

typedef struct {
    EmployeeType type;
    int monthlySalary;
    int commission;
    int bonus;
} Employee;

Employee employee_new(EmployeeType type, int monthlySalary, int commission, int bonus);
int payAmount(Employee e);

#endif
